#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evoroc/data.hpp"
#include "evoroc/model.hpp"

namespace evoroc {

struct TrainConfig {
  double learning_rate = 0.001;
  double momentum = 0.8;
  double l2_penalty = 0.001;
  std::size_t batch_size = 1;
  std::size_t max_epochs = 50;
  std::uint64_t master_seed = 0;
  std::size_t threads = 0;  // evaluation fan-out; 0 = auto

  void validate() const;
};

template <typename Scalar>
struct LossResult {
  Scalar loss;
  BasicTensor<Scalar> dlogits;
};

// -log softmax(logits)[label] via log-sum-exp; dlogits = softmax - one_hot.
template <typename Scalar>
LossResult<Scalar> cross_entropy_loss(const BasicTensor<Scalar>& logits, int label);

struct OptimizerState {
  CnnParams velocity;
};

OptimizerState make_optimizer_state(const CnnParams& like);

// g' = g + l2 * w;  v = momentum * v + g';  w -= lr * v
void sgd_update(Tensor& weights, const Tensor& grads, Tensor& velocity, const TrainConfig& config);
// Applies sgd_update to every parameter tensor and bumps model.revision.
void sgd_step(CnnModel& model, const CnnGradients& grads, OptimizerState& state, const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double train_auc = 0;
  double val_auc = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t selected = 0;  // index into epochs

  std::string to_csv() const;
};

struct TrainResult {
  CnnModel best;
  TrainHistory history;
};

// Eval-mode class-1 log-odds, one per slice, in slice order.
std::vector<double> score_slices(const CnnModel& model, const Dataset& split, std::size_t threads = 0);
double model_auc(const CnnModel& model, const Dataset& split, std::size_t threads = 0);

// Per-sample SGD over a per-epoch shuffle; after each epoch both splits are
// scored in eval mode and the checkpoint with the highest validation AUC
// (earliest on ties) is kept.
TrainResult train(const CnnModel& initial, const Dataset& train_split, const Dataset& val_split,
                  const TrainConfig& config);

}  // namespace evoroc
