#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "evoroc/rng.hpp"
#include "evoroc/tensor.hpp"

namespace evoroc {

enum class Mode { kTrain, kEval };

template <typename Scalar>
struct ConvParams {
  BasicTensor<Scalar> weights;  // (out_ch, in_ch, k, k)
  BasicTensor<Scalar> bias;     // (out_ch)

  std::size_t out_channels() const { return weights.extent(0); }
  std::size_t in_channels() const { return weights.extent(1); }
  std::size_t kernel() const { return weights.extent(2); }

  template <typename Other>
  ConvParams<Other> cast() const {
    return {weights.template cast<Other>(), bias.template cast<Other>()};
  }
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

template <typename Scalar>
struct LinearParams {
  BasicTensor<Scalar> weights;  // (out_dim, in_dim)
  BasicTensor<Scalar> bias;     // (out_dim)

  std::size_t out_dim() const { return weights.extent(0); }
  std::size_t in_dim() const { return weights.extent(1); }

  template <typename Other>
  LinearParams<Other> cast() const {
    return {weights.template cast<Other>(), bias.template cast<Other>()};
  }
  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

using ConvLayerParams = ConvParams<float>;
using LinearLayerParams = LinearParams<float>;

// Checks internal consistency of a layer (4-d weights, square kernel, bias
// length matching output channels) and throws kShapeMismatch otherwise.
template <typename Scalar>
void validate(const ConvParams<Scalar>& layer);
template <typename Scalar>
void validate(const LinearParams<Scalar>& layer);

// Fixed-order kernels shared by every forward path, so that two routes through
// the same layer (full model vs. cached features) agree bit for bit.
template <typename Scalar>
Scalar dot(const Scalar* a, const Scalar* b, std::size_t n);
template <typename Scalar>
void axpy(Scalar alpha, const Scalar* x, Scalar* y, std::size_t n);

// Valid cross-correlation, stride 1, no padding.
template <typename Scalar>
BasicTensor<Scalar> conv2d_forward(const BasicTensor<Scalar>& input, const ConvParams<Scalar>& layer);

template <typename Scalar>
struct ConvGrads {
  BasicTensor<Scalar> weights;
  BasicTensor<Scalar> bias;
  BasicTensor<Scalar> input;  // empty when not requested
};

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const BasicTensor<Scalar>& input, const ConvParams<Scalar>& layer,
                                  const BasicTensor<Scalar>& grad_output, bool want_input_grad);

template <typename Scalar>
struct PoolResult {
  BasicTensor<Scalar> output;
  std::vector<std::uint32_t> argmax;  // flat input index of each output element
};

// 2x2 max pool, stride 2; a trailing odd row or column is discarded.
template <typename Scalar>
PoolResult<Scalar> maxpool2_forward_indexed(const BasicTensor<Scalar>& input);
template <typename Scalar>
BasicTensor<Scalar> maxpool2_forward(const BasicTensor<Scalar>& input) {
  return maxpool2_forward_indexed(input).output;
}
template <typename Scalar>
BasicTensor<Scalar> maxpool2_backward(const BasicTensor<Scalar>& grad_output,
                                      const std::vector<std::uint32_t>& argmax, const Shape& input_shape);

template <typename Scalar>
struct DropoutResult {
  BasicTensor<Scalar> output;
  // Per-element multiplier: 0 for dropped, 1/(1-p) for kept; all ones in eval.
  BasicTensor<Scalar> mask;
};

// Inverted dropout. In eval mode the rng is not touched.
template <typename Scalar>
DropoutResult<Scalar> dropout_apply(const BasicTensor<Scalar>& input, double p, Mode mode, RngStream& rng);
template <typename Scalar>
BasicTensor<Scalar> dropout_backward(const BasicTensor<Scalar>& grad_output, const BasicTensor<Scalar>& mask);

template <typename Scalar>
void relu_inplace(BasicTensor<Scalar>& x);
// Gradient through ReLU given its output (zero where the output is zero).
template <typename Scalar>
BasicTensor<Scalar> relu_backward(const BasicTensor<Scalar>& grad_output, const BasicTensor<Scalar>& output);

template <typename Scalar>
BasicTensor<Scalar> linear_forward(const BasicTensor<Scalar>& x, const LinearParams<Scalar>& layer);

// Row-wise linear map of an (N, in_dim) matrix; row i equals linear_forward on
// row i exactly.
template <typename Scalar>
BasicTensor<Scalar> linear_forward_rows(const BasicTensor<Scalar>& x, const LinearParams<Scalar>& layer);

template <typename Scalar>
struct LinearGrads {
  BasicTensor<Scalar> weights;
  BasicTensor<Scalar> bias;
  BasicTensor<Scalar> input;
};

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const BasicTensor<Scalar>& x, const LinearParams<Scalar>& layer,
                                    const BasicTensor<Scalar>& grad_output);

// Glorot uniform, gain 1: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out, RngStream& rng);
// U[0, 1).
Tensor uniform01_init(const Shape& shape, RngStream& rng);

}  // namespace evoroc
