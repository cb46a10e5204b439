#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "evoroc/layers.hpp"

namespace evoroc {

// The fixed six-layer network: three valid 2-d convolutions, each followed by
// ReLU, 2x2 max pooling and dropout, then three fully connected layers with
// ReLU between them and raw logits at the end.
namespace arch {
inline constexpr std::size_t kInputChannels = 6;
inline constexpr std::size_t kInputSize = 64;
inline constexpr std::array<std::size_t, 4> kConvChannels = {6, 16, 32, 64};
inline constexpr std::array<std::size_t, 3> kConvKernels = {7, 5, 4};
inline constexpr std::array<std::size_t, 4> kFcDims = {1024, 256, 64, 2};
inline constexpr std::size_t kFeatureWidth = kFcDims[0];
inline constexpr double kDropout = 0.1;
}  // namespace arch

template <typename Scalar>
struct BasicCnnParams {
  ConvParams<Scalar> conv1, conv2, conv3;
  LinearParams<Scalar> fc1, fc2, fc3;

  template <typename Other>
  BasicCnnParams<Other> cast() const {
    return {conv1.template cast<Other>(), conv2.template cast<Other>(), conv3.template cast<Other>(),
            fc1.template cast<Other>(),   fc2.template cast<Other>(),   fc3.template cast<Other>()};
  }
  friend bool operator==(const BasicCnnParams&, const BasicCnnParams&) = default;
};

template <typename Scalar>
struct BasicCnnModel : BasicCnnParams<Scalar> {
  double dropout_p = arch::kDropout;
  Mode mode = Mode::kEval;
  // Bumped by every in-place parameter update; activation records remember the
  // revision they were produced against.
  std::uint64_t revision = 0;

  const BasicCnnParams<Scalar>& params() const { return *this; }
  BasicCnnParams<Scalar>& params() { return *this; }
};

using CnnParams = BasicCnnParams<float>;
using CnnModel = BasicCnnModel<float>;
using CnnGradients = BasicCnnParams<float>;

// Calls fn(name, tensor) for the twelve parameter tensors in checkpoint order:
// conv1.w, conv1.b, ..., fc3.w, fc3.b.
template <typename Params, typename Fn>
void visit_params(Params& p, Fn&& fn) {
  fn(std::string_view("conv1.w"), p.conv1.weights);
  fn(std::string_view("conv1.b"), p.conv1.bias);
  fn(std::string_view("conv2.w"), p.conv2.weights);
  fn(std::string_view("conv2.b"), p.conv2.bias);
  fn(std::string_view("conv3.w"), p.conv3.weights);
  fn(std::string_view("conv3.b"), p.conv3.bias);
  fn(std::string_view("fc1.w"), p.fc1.weights);
  fn(std::string_view("fc1.b"), p.fc1.bias);
  fn(std::string_view("fc2.w"), p.fc2.weights);
  fn(std::string_view("fc2.b"), p.fc2.bias);
  fn(std::string_view("fc3.w"), p.fc3.weights);
  fn(std::string_view("fc3.b"), p.fc3.bias);
}

template <typename Scalar>
BasicCnnModel<Scalar> cast_model(const BasicCnnModel<float>& m) {
  BasicCnnModel<Scalar> out;
  out.params() = m.params().template cast<Scalar>();
  out.dropout_p = m.dropout_p;
  out.mode = m.mode;
  return out;
}

// How the fully connected layers (and all biases) are initialized. Conv
// weights are always Glorot-uniform with fan_in = in*k*k, fan_out = out*k*k.
enum class FcInit {
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for FC weights and every bias.
  kFanInUniform,
  // U[0, 1) for FC weights and every bias.
  kUnitUniform,
};

CnnModel make_model(std::uint64_t seed, FcInit fc_init = FcInit::kFanInUniform);

// All-zero parameter set with the fixed layer shapes (also the zero gradient).
template <typename Scalar>
BasicCnnParams<Scalar> zero_params();

// Throws kShapeMismatch naming the first tensor whose shape differs.
template <typename Scalar>
void validate_architecture(const BasicCnnParams<Scalar>& p);

template <typename Scalar>
struct ActivationRecord {
  bool populated = false;
  const void* model = nullptr;
  std::uint64_t revision = 0;
  BasicTensor<Scalar> input;
  std::array<BasicTensor<Scalar>, 3> conv_act;  // post-ReLU conv outputs
  std::array<std::vector<std::uint32_t>, 3> pool_argmax;
  std::array<BasicTensor<Scalar>, 3> dropout_mask;
  std::array<BasicTensor<Scalar>, 3> stage_out;  // post-dropout, input to the next stage
  BasicTensor<Scalar> flat;
  BasicTensor<Scalar> hidden1, hidden2;  // post-ReLU fc1/fc2 outputs
  BasicTensor<Scalar> logits;
};

template <typename Scalar>
struct ForwardResult {
  BasicTensor<Scalar> logits;
  ActivationRecord<Scalar> record;
};

// Forward pass; `rng` drives dropout masks and is untouched in eval mode.
template <typename Scalar>
ForwardResult<Scalar> model_forward(const BasicCnnModel<Scalar>& model, const BasicTensor<Scalar>& input,
                                    RngStream& rng);

// Eval-mode logits without keeping intermediates.
template <typename Scalar>
BasicTensor<Scalar> model_logits(const BasicCnnModel<Scalar>& model, const BasicTensor<Scalar>& input);

// conv/pool/dropout stack only, flattened to length 1024 (eval mode).
template <typename Scalar>
BasicTensor<Scalar> extract_features(const BasicCnnModel<Scalar>& model, const BasicTensor<Scalar>& input);

// Reverse-mode gradients of sum(dlogits * logits) with respect to every parameter.
template <typename Scalar>
BasicCnnParams<Scalar> model_backward(const BasicCnnModel<Scalar>& model, const ActivationRecord<Scalar>& record,
                                      const BasicTensor<Scalar>& dlogits);

// Class-1 softmax probability of a two-logit vector, evaluated in double.
double positive_probability(double logit0, double logit1);
// log(p / (1 - p)) for the class-1 probability p above, i.e. logit1 - logit0.
// Ranking by it is ranking by p, but it stays distinct where p rounds to 0 or 1.
double positive_log_odds(double logit0, double logit1);

}  // namespace evoroc
