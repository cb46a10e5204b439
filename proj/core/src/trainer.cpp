#include "evoroc/trainer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "evoroc/evo.hpp"
#include "evoroc/metrics.hpp"
#include "evoroc/parallel.hpp"

namespace evoroc {

namespace {

void require_scorable(const Dataset& split, const char* name) {
  require(!split.empty(), ErrorCode::kInvalidArgument, std::string(name) + " split is empty");
  std::size_t pos = 0;
  for (const SliceRecord& s : split.slices) pos += s.label;
  require(pos > 0 && pos < split.size(), ErrorCode::kAucUndefined,
          std::string(name) + " split has a single class");
}

template <typename Params>
void accumulate(Params& into, const Params& g) {
  std::vector<Tensor*> dst;
  visit_params(into, [&](std::string_view, Tensor& t) { dst.push_back(&t); });
  std::size_t i = 0;
  visit_params(g, [&](std::string_view, const Tensor& t) {
    Tensor& d = *dst[i++];
    for (std::size_t k = 0; k < t.size(); ++k) d[k] += t[k];
  });
}

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate > 0, ErrorCode::kInvalidArgument, "learning rate must be > 0");
  require(momentum >= 0 && momentum < 1, ErrorCode::kInvalidArgument, "momentum must be in [0,1)");
  require(l2_penalty >= 0, ErrorCode::kInvalidArgument, "l2 penalty must be >= 0");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch size must be >= 1");
  require(max_epochs >= 1, ErrorCode::kInvalidArgument, "max epochs must be >= 1");
}

template <typename Scalar>
LossResult<Scalar> cross_entropy_loss(const BasicTensor<Scalar>& logits, int label) {
  require(logits.size() == 2, ErrorCode::kShapeMismatch, "cross_entropy_loss expects 2 logits");
  require(label == 0 || label == 1, ErrorCode::kInvalidArgument, "label must be 0 or 1");
  require(logits.all_finite(), ErrorCode::kInvalidArgument, "cross_entropy_loss: non-finite logits");
  const Scalar m = std::max(logits[0], logits[1]);
  const Scalar e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  const Scalar lse = m + std::log(e0 + e1);
  LossResult<Scalar> r{lse - logits[static_cast<std::size_t>(label)], BasicTensor<Scalar>({2})};
  r.dlogits[0] = e0 / (e0 + e1) - (label == 0 ? Scalar{1} : Scalar{0});
  r.dlogits[1] = e1 / (e0 + e1) - (label == 1 ? Scalar{1} : Scalar{0});
  return r;
}

template LossResult<float> cross_entropy_loss(const BasicTensor<float>&, int);
template LossResult<double> cross_entropy_loss(const BasicTensor<double>&, int);

OptimizerState make_optimizer_state(const CnnParams& like) {
  OptimizerState s{like};
  visit_params(s.velocity, [](std::string_view, Tensor& t) { t.fill(0.0f); });
  return s;
}

void sgd_update(Tensor& weights, const Tensor& grads, Tensor& velocity, const TrainConfig& config) {
  require(weights.shape() == grads.shape() && weights.shape() == velocity.shape(), ErrorCode::kShapeMismatch,
          "sgd_update: weights " + shape_string(weights.shape()) + ", grads " + shape_string(grads.shape()) +
              ", velocity " + shape_string(velocity.shape()));
  const auto lr = static_cast<float>(config.learning_rate);
  const auto mu = static_cast<float>(config.momentum);
  const auto l2 = static_cast<float>(config.l2_penalty);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const float g = grads[i] + l2 * weights[i];
    velocity[i] = mu * velocity[i] + g;
    weights[i] -= lr * velocity[i];
  }
}

void sgd_step(CnnModel& model, const CnnGradients& grads, OptimizerState& state, const TrainConfig& config) {
  std::vector<Tensor*> w, v;
  visit_params(model.params(), [&](std::string_view, Tensor& t) { w.push_back(&t); });
  visit_params(state.velocity, [&](std::string_view, Tensor& t) { v.push_back(&t); });
  std::size_t i = 0;
  visit_params(grads, [&](std::string_view, const Tensor& g) {
    sgd_update(*w[i], g, *v[i], config);
    ++i;
  });
  ++model.revision;
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,train_auc,val_auc\n";
  for (const EpochRecord& e : epochs) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f}\n", e.epoch, e.train_loss, e.train_auc, e.val_auc);
  }
  return out;
}

std::vector<double> score_slices(const CnnModel& model, const Dataset& split, std::size_t threads) {
  // Same numbers as per-slice model_logits: the FC kernel's per-element
  // accumulation order does not depend on how many rows are batched.
  const FeatureCache cache = build_feature_cache(model, split, threads);
  return head_scores(extract_head(model), cache);
}

double model_auc(const CnnModel& model, const Dataset& split, std::size_t threads) {
  return auc(score_slices(model, split, threads), split.labels());
}

TrainResult train(const CnnModel& initial, const Dataset& train_split, const Dataset& val_split,
                  const TrainConfig& config) {
  config.validate();
  require_scorable(train_split, "train");
  require_scorable(val_split, "validation");
  validate_architecture(initial.params());

  CnnModel model = initial;
  model.revision = 0;
  OptimizerState state = make_optimizer_state(model.params());
  const std::vector<std::uint8_t> train_labels = train_split.labels();
  const std::vector<std::uint8_t> val_labels = val_split.labels();
  const float inv_batch = 1.0f / static_cast<float>(config.batch_size);

  TrainResult result;
  double best_val = -1.0;
  std::vector<std::size_t> order(train_split.size());
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle(config.master_seed, {stream::kShuffle, epoch});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    model.mode = Mode::kTrain;
    double loss_sum = 0.0;
    CnnGradients batch_grads = zero_params<float>();
    std::size_t in_batch = 0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const SliceRecord& slice = train_split.slices[order[step]];
      RngStream dropout(config.master_seed, {stream::kDropout, epoch, step});
      ForwardResult<float> fwd = model_forward(model, slice.pixels, dropout);
      LossResult<float> loss = cross_entropy_loss(fwd.logits, slice.label);
      loss_sum += loss.loss;
      CnnGradients g = model_backward(model, fwd.record, loss.dlogits);
      if (config.batch_size == 1) {
        sgd_step(model, g, state, config);
        continue;
      }
      accumulate(batch_grads, g);
      if (++in_batch == config.batch_size || step + 1 == order.size()) {
        const float scale = in_batch == config.batch_size ? inv_batch : 1.0f / static_cast<float>(in_batch);
        visit_params(batch_grads, [&](std::string_view, Tensor& t) {
          for (float& v : t.values()) v *= scale;
        });
        sgd_step(model, batch_grads, state, config);
        batch_grads = zero_params<float>();
        in_batch = 0;
      }
    }

    model.mode = Mode::kEval;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_auc = auc(score_slices(model, train_split, config.threads), train_labels);
    rec.val_auc = auc(score_slices(model, val_split, config.threads), val_labels);
    result.history.epochs.push_back(rec);
    if (rec.val_auc > best_val) {
      best_val = rec.val_auc;
      result.best = model;
      result.history.selected = result.history.epochs.size() - 1;
    }
  }
  result.best.mode = Mode::kEval;
  return result;
}

}  // namespace evoroc
