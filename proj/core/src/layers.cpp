#include "evoroc/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace evoroc {

namespace {

std::string dim_msg(const char* what, std::size_t got, std::size_t want) {
  return std::string(what) + " is " + std::to_string(got) + ", expected " + std::to_string(want);
}

template <typename Scalar>
void require_chw(const BasicTensor<Scalar>& t, const char* op) {
  require(t.ndim() == 3, ErrorCode::kShapeMismatch,
          std::string(op) + ": input must be (C,H,W), got " + shape_string(t.shape()));
}

}  // namespace

template <typename Scalar>
void validate(const ConvParams<Scalar>& layer) {
  const auto& w = layer.weights;
  require(w.ndim() == 4 && w.extent(2) == w.extent(3), ErrorCode::kShapeMismatch,
          "conv weights must be (out,in,k,k), got " + shape_string(w.shape()));
  require(layer.bias.ndim() == 1 && layer.bias.extent(0) == w.extent(0), ErrorCode::kShapeMismatch,
          "conv bias " + shape_string(layer.bias.shape()) + " does not match out channels " +
              std::to_string(w.extent(0)));
}

template <typename Scalar>
void validate(const LinearParams<Scalar>& layer) {
  const auto& w = layer.weights;
  require(w.ndim() == 2, ErrorCode::kShapeMismatch,
          "linear weights must be (out,in), got " + shape_string(w.shape()));
  require(layer.bias.ndim() == 1 && layer.bias.extent(0) == w.extent(0), ErrorCode::kShapeMismatch,
          "linear bias " + shape_string(layer.bias.shape()) + " does not match out dim " +
              std::to_string(w.extent(0)));
}

template <typename Scalar>
Scalar dot(const Scalar* a, const Scalar* b, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  Scalar acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += a[i + j] * b[i + j];
  }
  Scalar tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  Scalar sum = 0;
  for (std::size_t j = 0; j < kLanes; ++j) sum += acc[j];
  return sum + tail;
}

template <typename Scalar>
void axpy(Scalar alpha, const Scalar* x, Scalar* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

namespace {

// Matrix whose element (i, j) sits at data[row[i] + col[j]]. Covers plain
// row-major storage, transposes and the im2col view of a convolution input
// without materializing anything.
template <typename Scalar>
struct OffsetView {
  Scalar* data;
  const std::size_t* row;
  const std::size_t* col;
};

std::vector<std::size_t> iota_offsets(std::size_t n, std::size_t stride) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i * stride;
  return v;
}

template <typename Scalar>
struct VecOf;
template <>
struct VecOf<float> {
  typedef float type __attribute__((vector_size(64), aligned(alignof(float))));
};
template <>
struct VecOf<double> {
  typedef double type __attribute__((vector_size(64), aligned(alignof(double))));
};

// C += A * B with A (m x k), B (k x n). Each C element accumulates its k
// products in increasing k order regardless of m and n, which is what lets a
// single-row call reproduce a batched call bit for bit.
template <typename Scalar>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, OffsetView<const Scalar> a,
                     OffsetView<const Scalar> b, OffsetView<Scalar> c) {
  // 4 x (4 vectors) register tile of 16 accumulators.
  using Vec = typename VecOf<Scalar>::type;
  constexpr std::size_t kLanes = sizeof(Vec) / sizeof(Scalar);
  constexpr std::size_t kVecs = 4;
  constexpr std::size_t kMr = 4;
  constexpr std::size_t kNr = kVecs * kLanes;
  const std::size_t panels = (m + kMr - 1) / kMr;
  std::vector<Scalar> ap(panels * k * kMr);
  for (std::size_t p = 0; p < panels; ++p) {
    for (std::size_t r = 0; r < kMr; ++r) {
      const std::size_t i = p * kMr + r;
      Scalar* dst = ap.data() + p * k * kMr + r;
      if (i < m) {
        const Scalar* src = a.data + a.row[i];
        for (std::size_t kk = 0; kk < k; ++kk) dst[kk * kMr] = src[a.col[kk]];
      } else {
        for (std::size_t kk = 0; kk < k; ++kk) dst[kk * kMr] = Scalar{0};
      }
    }
  }
  std::vector<Scalar> bp(k * kNr);
  for (std::size_t j0 = 0; j0 < n; j0 += kNr) {
    const std::size_t nr = std::min(kNr, n - j0);
    // Split the panel's columns into runs of consecutive offsets so packing
    // is a handful of block copies per row (im2col rows are mostly contiguous).
    std::size_t run_start[kNr + 1];
    std::size_t runs = 0;
    for (std::size_t j = 0; j < nr; ++j) {
      if (j == 0 || b.col[j0 + j] != b.col[j0 + j - 1] + 1) run_start[runs++] = j;
    }
    run_start[runs] = nr;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const Scalar* src = b.data + b.row[kk];
      Scalar* dst = bp.data() + kk * kNr;
      for (std::size_t q = 0; q < runs; ++q) {
        const std::size_t j = run_start[q];
        std::copy_n(src + b.col[j0 + j], run_start[q + 1] - j, dst + j);
      }
      for (std::size_t j = nr; j < kNr; ++j) dst[j] = Scalar{0};
    }
    for (std::size_t p = 0; p < panels; ++p) {
      Vec acc[kMr][kVecs] = {};
      const Scalar* ablock = ap.data() + p * k * kMr;
      const Vec* bvec = reinterpret_cast<const Vec*>(bp.data());
      for (std::size_t kk = 0; kk < k; ++kk) {
        const Vec* bv = bvec + kk * kVecs;
        for (std::size_t r = 0; r < kMr; ++r) {
          const Vec av = Vec{} + ablock[kk * kMr + r];
          for (std::size_t v = 0; v < kVecs; ++v) acc[r][v] += av * bv[v];
        }
      }
      const std::size_t mr = std::min(kMr, m - p * kMr);
      alignas(64) Scalar out[kMr][kNr];
      for (std::size_t r = 0; r < kMr; ++r) {
        for (std::size_t v = 0; v < kVecs; ++v) reinterpret_cast<Vec*>(out[r])[v] = acc[r][v];
      }
      for (std::size_t r = 0; r < mr; ++r) {
        Scalar* dst = c.data + c.row[p * kMr + r];
        for (std::size_t j = 0; j < nr; ++j) dst[c.col[j0 + j]] += out[r][j];
      }
    }
  }
}

// Offsets describing the im2col matrix of a (c_in, h, w) input for a k x k
// kernel: patch index q = (ic, ky, kx) and output pixel p = (y, x) address
// input[patch[q] + pixel[p]].
struct Im2colOffsets {
  std::vector<std::size_t> patch;
  std::vector<std::size_t> pixel;
};

Im2colOffsets im2col_offsets(std::size_t c_in, std::size_t h, std::size_t w, std::size_t k) {
  const std::size_t ho = h - k + 1, wo = w - k + 1;
  Im2colOffsets o;
  o.patch.reserve(c_in * k * k);
  for (std::size_t ic = 0; ic < c_in; ++ic) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) o.patch.push_back((ic * h + ky) * w + kx);
    }
  }
  o.pixel.reserve(ho * wo);
  for (std::size_t y = 0; y < ho; ++y) {
    for (std::size_t x = 0; x < wo; ++x) o.pixel.push_back(y * w + x);
  }
  return o;
}

}  // namespace

template <typename Scalar>
BasicTensor<Scalar> conv2d_forward(const BasicTensor<Scalar>& input, const ConvParams<Scalar>& layer) {
  require_chw(input, "conv2d_forward");
  validate(layer);
  const std::size_t c_in = input.extent(0), h = input.extent(1), w = input.extent(2);
  const std::size_t c_out = layer.out_channels(), k = layer.kernel();
  require(c_in == layer.in_channels(), ErrorCode::kShapeMismatch,
          "conv2d_forward: " + dim_msg("input channels", c_in, layer.in_channels()));
  require(h >= k, ErrorCode::kShapeMismatch, "conv2d_forward: " + dim_msg("input height", h, k) + " or more");
  require(w >= k, ErrorCode::kShapeMismatch, "conv2d_forward: " + dim_msg("input width", w, k) + " or more");

  const std::size_t ho = h - k + 1, wo = w - k + 1, patch = c_in * k * k, pixels = ho * wo;
  BasicTensor<Scalar> out({c_out, ho, wo});
  for (std::size_t oc = 0; oc < c_out; ++oc) {
    std::fill(out.data() + oc * pixels, out.data() + (oc + 1) * pixels, layer.bias[oc]);
  }
  const Im2colOffsets im = im2col_offsets(c_in, h, w, k);
  const std::vector<std::size_t> w_rows = iota_offsets(c_out, patch), w_cols = iota_offsets(patch, 1);
  const std::vector<std::size_t> o_rows = iota_offsets(c_out, pixels), o_cols = iota_offsets(pixels, 1);
  gemm_accumulate<Scalar>(c_out, pixels, patch, {layer.weights.data(), w_rows.data(), w_cols.data()},
                          {input.data(), im.patch.data(), im.pixel.data()}, {out.data(), o_rows.data(), o_cols.data()});
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const BasicTensor<Scalar>& input, const ConvParams<Scalar>& layer,
                                  const BasicTensor<Scalar>& grad_output, bool want_input_grad) {
  require_chw(input, "conv2d_backward");
  validate(layer);
  const std::size_t c_in = input.extent(0), h = input.extent(1), w = input.extent(2);
  const std::size_t c_out = layer.out_channels(), k = layer.kernel();
  require(c_in == layer.in_channels() && h >= k && w >= k, ErrorCode::kShapeMismatch,
          "conv2d_backward: input " + shape_string(input.shape()) + " incompatible with kernel " +
              shape_string(layer.weights.shape()));
  const std::size_t ho = h - k + 1, wo = w - k + 1, patch = c_in * k * k, pixels = ho * wo;
  require(grad_output.shape() == Shape{c_out, ho, wo}, ErrorCode::kShapeMismatch,
          "conv2d_backward: grad_output " + shape_string(grad_output.shape()) + ", expected " +
              shape_string({c_out, ho, wo}));

  ConvGrads<Scalar> g{BasicTensor<Scalar>(layer.weights.shape()), BasicTensor<Scalar>(layer.bias.shape()), {}};
  const Scalar* go = grad_output.data();
  for (std::size_t oc = 0; oc < c_out; ++oc) {
    Scalar s = 0;
    for (std::size_t i = 0; i < pixels; ++i) s += go[oc * pixels + i];
    g.bias[oc] = s;
  }
  const Im2colOffsets im = im2col_offsets(c_in, h, w, k);
  const std::vector<std::size_t> g_rows = iota_offsets(c_out, pixels), unit_pixels = iota_offsets(pixels, 1);
  const std::vector<std::size_t> w_rows = iota_offsets(c_out, patch), unit_patch = iota_offsets(patch, 1);
  // dW (c_out x patch) = dOut (c_out x pixels) * im2col^T (pixels x patch)
  gemm_accumulate<Scalar>(c_out, patch, pixels, {go, g_rows.data(), unit_pixels.data()},
                          {input.data(), im.pixel.data(), im.patch.data()},
                          {g.weights.data(), w_rows.data(), unit_patch.data()});
  if (want_input_grad) {
    g.input = BasicTensor<Scalar>(input.shape());
    // dIn scattered through im2col (patch x pixels) = W^T (patch x c_out) * dOut (c_out x pixels)
    gemm_accumulate<Scalar>(patch, pixels, c_out, {layer.weights.data(), unit_patch.data(), w_rows.data()},
                            {go, g_rows.data(), unit_pixels.data()},
                            {g.input.data(), im.patch.data(), im.pixel.data()});
  }
  return g;
}

template <typename Scalar>
PoolResult<Scalar> maxpool2_forward_indexed(const BasicTensor<Scalar>& input) {
  require_chw(input, "maxpool2_forward");
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  require(h >= 2 && w >= 2, ErrorCode::kShapeMismatch,
          "maxpool2_forward: spatial extents must be >= 2, got " + shape_string(input.shape()));
  const std::size_t ho = h / 2, wo = w / 2;
  PoolResult<Scalar> r{BasicTensor<Scalar>({c, ho, wo}), std::vector<std::uint32_t>(c * ho * wo)};
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x, ++o) {
        std::size_t best = (ch * h + 2 * y) * w + 2 * x;
        const std::size_t candidates[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t idx : candidates) {
          if (input[idx] > input[best]) best = idx;
        }
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename Scalar>
BasicTensor<Scalar> maxpool2_backward(const BasicTensor<Scalar>& grad_output,
                                      const std::vector<std::uint32_t>& argmax, const Shape& input_shape) {
  require(grad_output.size() == argmax.size(), ErrorCode::kShapeMismatch,
          "maxpool2_backward: grad_output size does not match stored argmax");
  BasicTensor<Scalar> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_output[i];
  return g;
}

template <typename Scalar>
DropoutResult<Scalar> dropout_apply(const BasicTensor<Scalar>& input, double p, Mode mode, RngStream& rng) {
  require(p >= 0.0 && p < 1.0, ErrorCode::kInvalidArgument,
          "dropout probability must be in [0,1), got " + std::to_string(p));
  DropoutResult<Scalar> r{input, BasicTensor<Scalar>(input.shape(), Scalar{1})};
  if (mode == Mode::kEval || p == 0.0) return r;
  const Scalar keep_scale = Scalar(1) / Scalar(1.0 - p);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const Scalar m = rng.uniform() < p ? Scalar{0} : keep_scale;
    r.mask[i] = m;
    r.output[i] = input[i] * m;
  }
  return r;
}

template <typename Scalar>
BasicTensor<Scalar> dropout_backward(const BasicTensor<Scalar>& grad_output, const BasicTensor<Scalar>& mask) {
  require(grad_output.shape() == mask.shape(), ErrorCode::kShapeMismatch,
          "dropout_backward: mask shape " + shape_string(mask.shape()) + " vs grad " +
              shape_string(grad_output.shape()));
  BasicTensor<Scalar> g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

template <typename Scalar>
void relu_inplace(BasicTensor<Scalar>& x) {
  for (Scalar& v : x.values()) v = v > Scalar{0} ? v : Scalar{0};
}

template <typename Scalar>
BasicTensor<Scalar> relu_backward(const BasicTensor<Scalar>& grad_output, const BasicTensor<Scalar>& output) {
  require(grad_output.size() == output.size(), ErrorCode::kShapeMismatch, "relu_backward: size mismatch");
  BasicTensor<Scalar> g = grad_output;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(output[i] > Scalar{0})) g[i] = Scalar{0};
  }
  return g;
}

template <typename Scalar>
BasicTensor<Scalar> linear_forward_rows(const BasicTensor<Scalar>& x, const LinearParams<Scalar>& layer) {
  validate(layer);
  const std::size_t out_dim = layer.out_dim(), in_dim = layer.in_dim();
  require(x.ndim() == 2 && x.extent(1) == in_dim, ErrorCode::kShapeMismatch,
          "linear_forward_rows: input " + shape_string(x.shape()) + ", expected (N," +
              std::to_string(in_dim) + ")");
  const std::size_t n = x.extent(0);
  BasicTensor<Scalar> y({n, out_dim});
  for (std::size_t r = 0; r < n; ++r) std::copy(layer.bias.data(), layer.bias.data() + out_dim, y.data() + r * out_dim);
  const std::vector<std::size_t> x_rows = iota_offsets(n, in_dim), unit_in = iota_offsets(in_dim, 1);
  const std::vector<std::size_t> w_cols = iota_offsets(out_dim, in_dim);
  const std::vector<std::size_t> y_rows = iota_offsets(n, out_dim), unit_out = iota_offsets(out_dim, 1);
  // Y (n x out) += X (n x in) * W^T (in x out)
  gemm_accumulate<Scalar>(n, out_dim, in_dim, {x.data(), x_rows.data(), unit_in.data()},
                          {layer.weights.data(), unit_in.data(), w_cols.data()}, {y.data(), y_rows.data(), unit_out.data()});
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> linear_forward(const BasicTensor<Scalar>& x, const LinearParams<Scalar>& layer) {
  validate(layer);
  require(x.size() == layer.in_dim(), ErrorCode::kShapeMismatch,
          "linear_forward: " + dim_msg("input length", x.size(), layer.in_dim()));
  return linear_forward_rows(x.reshaped({1, layer.in_dim()}), layer).reshaped({layer.out_dim()});
}

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const BasicTensor<Scalar>& x, const LinearParams<Scalar>& layer,
                                    const BasicTensor<Scalar>& grad_output) {
  validate(layer);
  const std::size_t out_dim = layer.out_dim(), in_dim = layer.in_dim();
  require(x.size() == in_dim, ErrorCode::kShapeMismatch,
          "linear_backward: " + dim_msg("input length", x.size(), in_dim));
  require(grad_output.size() == out_dim, ErrorCode::kShapeMismatch,
          "linear_backward: " + dim_msg("grad_output length", grad_output.size(), out_dim));
  LinearGrads<Scalar> g{BasicTensor<Scalar>(layer.weights.shape()), grad_output.reshaped({out_dim}),
                        BasicTensor<Scalar>({in_dim})};
  for (std::size_t o = 0; o < out_dim; ++o) {
    const Scalar go = grad_output[o];
    if (go == Scalar{0}) continue;
    axpy(go, x.data(), g.weights.data() + o * in_dim, in_dim);
    axpy(go, layer.weights.data() + o * in_dim, g.input.data(), in_dim);
  }
  return g;
}

Tensor xavier_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  require(fan_in >= 1 && fan_out >= 1, ErrorCode::kInvalidArgument, "xavier_init: fans must be >= 1");
  Tensor t(shape);
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-a, a));
  return t;
}

Tensor uniform01_init(const Shape& shape, RngStream& rng) {
  Tensor t(shape);
  for (float& v : t.values()) v = rng.uniform_float();
  return t;
}

#define EVOROC_INSTANTIATE(T)                                                                          \
  template void validate(const ConvParams<T>&);                                                        \
  template void validate(const LinearParams<T>&);                                                      \
  template T dot(const T*, const T*, std::size_t);                                                     \
  template void axpy(T, const T*, T*, std::size_t);                                                    \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const ConvParams<T>&);                 \
  template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const ConvParams<T>&,                   \
                                        const BasicTensor<T>&, bool);                                  \
  template PoolResult<T> maxpool2_forward_indexed(const BasicTensor<T>&);                              \
  template BasicTensor<T> maxpool2_backward(const BasicTensor<T>&, const std::vector<std::uint32_t>&, \
                                            const Shape&);                                             \
  template DropoutResult<T> dropout_apply(const BasicTensor<T>&, double, Mode, RngStream&);            \
  template BasicTensor<T> dropout_backward(const BasicTensor<T>&, const BasicTensor<T>&);              \
  template void relu_inplace(BasicTensor<T>&);                                                         \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> linear_forward(const BasicTensor<T>&, const LinearParams<T>&);               \
  template BasicTensor<T> linear_forward_rows(const BasicTensor<T>&, const LinearParams<T>&);          \
  template LinearGrads<T> linear_backward(const BasicTensor<T>&, const LinearParams<T>&,               \
                                          const BasicTensor<T>&);

EVOROC_INSTANTIATE(float)
EVOROC_INSTANTIATE(double)

#undef EVOROC_INSTANTIATE

}  // namespace evoroc
