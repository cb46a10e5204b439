#include "evoroc/model.hpp"

#include <cmath>

namespace evoroc {

namespace {

template <typename Scalar>
void expect_shape(const BasicTensor<Scalar>& t, const Shape& want, std::string_view name) {
  require(t.shape() == want, ErrorCode::kShapeMismatch,
          std::string(name) + " has shape " + shape_string(t.shape()) + ", expected " + shape_string(want));
}

template <typename Scalar>
const ConvParams<Scalar>& conv_at(const BasicCnnParams<Scalar>& p, std::size_t i) {
  return i == 0 ? p.conv1 : i == 1 ? p.conv2 : p.conv3;
}

template <typename Scalar>
void check_input(const BasicTensor<Scalar>& input) {
  expect_shape(input, Shape{arch::kInputChannels, arch::kInputSize, arch::kInputSize}, "model input");
}

// conv -> ReLU -> pool -> dropout, three times.
template <typename Scalar>
BasicTensor<Scalar> feature_stack(const BasicCnnModel<Scalar>& model, const BasicTensor<Scalar>& input,
                                  Mode mode, RngStream* rng, ActivationRecord<Scalar>* rec) {
  BasicTensor<Scalar> x = input;
  for (std::size_t stage = 0; stage < 3; ++stage) {
    BasicTensor<Scalar> a = conv2d_forward(x, conv_at(model.params(), stage));
    relu_inplace(a);
    PoolResult<Scalar> pooled = maxpool2_forward_indexed(a);
    if (mode == Mode::kTrain) {
      DropoutResult<Scalar> d = dropout_apply(pooled.output, model.dropout_p, mode, *rng);
      x = std::move(d.output);
      if (rec) rec->dropout_mask[stage] = std::move(d.mask);
    } else {
      x = std::move(pooled.output);
      if (rec) rec->dropout_mask[stage] = BasicTensor<Scalar>(x.shape(), Scalar{1});
    }
    if (rec) {
      rec->conv_act[stage] = std::move(a);
      rec->pool_argmax[stage] = std::move(pooled.argmax);
      rec->stage_out[stage] = x;
    }
  }
  return x.reshaped({arch::kFeatureWidth});
}

}  // namespace

namespace {

Tensor fan_in_uniform(const Shape& shape, std::size_t fan_in, RngStream& rng) {
  Tensor t(shape);
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-a, a));
  return t;
}

}  // namespace

CnnModel make_model(std::uint64_t seed, FcInit fc_init) {
  RngStream rng(seed, {stream::kModelInit});
  const auto draw = [&](const Shape& shape, std::size_t fan_in) {
    return fc_init == FcInit::kUnitUniform ? uniform01_init(shape, rng) : fan_in_uniform(shape, fan_in, rng);
  };
  CnnModel m;
  ConvParams<float>* convs[3] = {&m.conv1, &m.conv2, &m.conv3};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t in = arch::kConvChannels[i], out = arch::kConvChannels[i + 1], k = arch::kConvKernels[i];
    convs[i]->weights = xavier_init({out, in, k, k}, in * k * k, out * k * k, rng);
    convs[i]->bias = draw({out}, in * k * k);
  }
  LinearParams<float>* fcs[3] = {&m.fc1, &m.fc2, &m.fc3};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t in = arch::kFcDims[i], out = arch::kFcDims[i + 1];
    fcs[i]->weights = draw({out, in}, in);
    fcs[i]->bias = draw({out}, in);
  }
  return m;
}

template <typename Scalar>
BasicCnnParams<Scalar> zero_params() {
  BasicCnnParams<Scalar> p;
  ConvParams<Scalar>* convs[3] = {&p.conv1, &p.conv2, &p.conv3};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t in = arch::kConvChannels[i], out = arch::kConvChannels[i + 1], k = arch::kConvKernels[i];
    convs[i]->weights = BasicTensor<Scalar>({out, in, k, k});
    convs[i]->bias = BasicTensor<Scalar>({out});
  }
  LinearParams<Scalar>* fcs[3] = {&p.fc1, &p.fc2, &p.fc3};
  for (std::size_t i = 0; i < 3; ++i) {
    fcs[i]->weights = BasicTensor<Scalar>({arch::kFcDims[i + 1], arch::kFcDims[i]});
    fcs[i]->bias = BasicTensor<Scalar>({arch::kFcDims[i + 1]});
  }
  return p;
}

template <typename Scalar>
void validate_architecture(const BasicCnnParams<Scalar>& p) {
  const BasicCnnParams<Scalar> ref = zero_params<Scalar>();
  auto names = std::array<std::string_view, 12>{};
  auto want = std::array<Shape, 12>{};
  std::size_t i = 0;
  visit_params(ref, [&](std::string_view name, const BasicTensor<Scalar>& t) {
    names[i] = name;
    want[i++] = t.shape();
  });
  i = 0;
  visit_params(p, [&](std::string_view, const BasicTensor<Scalar>& t) {
    expect_shape(t, want[i], names[i]);
    ++i;
  });
}

template <typename Scalar>
ForwardResult<Scalar> model_forward(const BasicCnnModel<Scalar>& model, const BasicTensor<Scalar>& input,
                                    RngStream& rng) {
  check_input(input);
  validate_architecture(model.params());
  ForwardResult<Scalar> r;
  ActivationRecord<Scalar>& rec = r.record;
  rec.input = input;
  rec.flat = feature_stack(model, input, model.mode, &rng, &rec);
  rec.hidden1 = linear_forward(rec.flat, model.fc1);
  relu_inplace(rec.hidden1);
  rec.hidden2 = linear_forward(rec.hidden1, model.fc2);
  relu_inplace(rec.hidden2);
  rec.logits = linear_forward(rec.hidden2, model.fc3);
  rec.populated = true;
  rec.model = &model;
  rec.revision = model.revision;
  r.logits = rec.logits;
  return r;
}

template <typename Scalar>
BasicTensor<Scalar> extract_features(const BasicCnnModel<Scalar>& model, const BasicTensor<Scalar>& input) {
  check_input(input);
  validate_architecture(model.params());
  return feature_stack<Scalar>(model, input, Mode::kEval, nullptr, nullptr);
}

template <typename Scalar>
BasicTensor<Scalar> model_logits(const BasicCnnModel<Scalar>& model, const BasicTensor<Scalar>& input) {
  BasicTensor<Scalar> h = extract_features(model, input);
  h = linear_forward(h, model.fc1);
  relu_inplace(h);
  h = linear_forward(h, model.fc2);
  relu_inplace(h);
  return linear_forward(h, model.fc3);
}

template <typename Scalar>
BasicCnnParams<Scalar> model_backward(const BasicCnnModel<Scalar>& model, const ActivationRecord<Scalar>& rec,
                                      const BasicTensor<Scalar>& dlogits) {
  require(rec.populated, ErrorCode::kStaleRecord, "model_backward called without a forward record");
  require(rec.model == &model && rec.revision == model.revision, ErrorCode::kStaleRecord,
          "activation record was produced by a different model or an older parameter revision");
  require(dlogits.size() == arch::kFcDims[3], ErrorCode::kShapeMismatch,
          "dlogits length " + std::to_string(dlogits.size()) + ", expected 2");

  BasicCnnParams<Scalar> g;
  LinearGrads<Scalar> l3 = linear_backward(rec.hidden2, model.fc3, dlogits);
  g.fc3 = {std::move(l3.weights), std::move(l3.bias)};
  LinearGrads<Scalar> l2 = linear_backward(rec.hidden1, model.fc2, relu_backward(l3.input, rec.hidden2));
  g.fc2 = {std::move(l2.weights), std::move(l2.bias)};
  LinearGrads<Scalar> l1 = linear_backward(rec.flat, model.fc1, relu_backward(l2.input, rec.hidden1));
  g.fc1 = {std::move(l1.weights), std::move(l1.bias)};

  BasicTensor<Scalar> grad = l1.input.reshaped(rec.stage_out[2].shape());
  ConvParams<Scalar>* gconv[3] = {&g.conv1, &g.conv2, &g.conv3};
  for (std::size_t s = 3; s-- > 0;) {
    grad = dropout_backward(grad, rec.dropout_mask[s]);
    grad = maxpool2_backward(grad, rec.pool_argmax[s], rec.conv_act[s].shape());
    grad = relu_backward(grad, rec.conv_act[s]);
    const BasicTensor<Scalar>& stage_in = s == 0 ? rec.input : rec.stage_out[s - 1];
    ConvGrads<Scalar> cg = conv2d_backward(stage_in, conv_at(model.params(), s), grad, s > 0);
    *gconv[s] = {std::move(cg.weights), std::move(cg.bias)};
    grad = std::move(cg.input);
  }
  return g;
}

double positive_probability(double logit0, double logit1) {
  // sigmoid(l1 - l0) == softmax(l)[1], written to avoid exp overflow.
  const double d = logit1 - logit0;
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

double positive_log_odds(double logit0, double logit1) { return logit1 - logit0; }

#define EVOROC_INSTANTIATE(T)                                                                              \
  template BasicCnnParams<T> zero_params<T>();                                                             \
  template void validate_architecture(const BasicCnnParams<T>&);                                           \
  template ForwardResult<T> model_forward(const BasicCnnModel<T>&, const BasicTensor<T>&, RngStream&);     \
  template BasicTensor<T> model_logits(const BasicCnnModel<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> extract_features(const BasicCnnModel<T>&, const BasicTensor<T>&);                \
  template BasicCnnParams<T> model_backward(const BasicCnnModel<T>&, const ActivationRecord<T>&,           \
                                            const BasicTensor<T>&);

EVOROC_INSTANTIATE(float)
EVOROC_INSTANTIATE(double)

#undef EVOROC_INSTANTIATE

}  // namespace evoroc
