#include <benchmark/benchmark.h>

#include "evoroc/data.hpp"
#include "evoroc/evo.hpp"
#include "evoroc/layers.hpp"
#include "evoroc/metrics.hpp"
#include "evoroc/trainer.hpp"

namespace evoroc {
namespace {

Tensor random_input(std::uint64_t seed) {
  RngStream rng(seed);
  Tensor x({6, 64, 64});
  for (float& v : x.values()) v = static_cast<float>(rng.normal());
  return x;
}

void BM_Conv1Forward(benchmark::State& state) {
  const CnnModel m = make_model(1);
  const Tensor x = random_input(2);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, m.conv1));
}
BENCHMARK(BM_Conv1Forward);

void BM_EvalForward(benchmark::State& state) {
  const CnnModel m = make_model(1);
  const Tensor x = random_input(3);
  for (auto _ : state) benchmark::DoNotOptimize(model_logits(m, x));
}
BENCHMARK(BM_EvalForward);

void BM_TrainStep(benchmark::State& state) {
  CnnModel m = make_model(1);
  m.mode = Mode::kTrain;
  const Tensor x = random_input(4);
  TrainConfig cfg;
  OptimizerState opt = make_optimizer_state(m.params());
  RngStream masks(5);
  for (auto _ : state) {
    const ForwardResult<float> f = model_forward(m, x, masks);
    const CnnGradients g = model_backward(m, f.record, cross_entropy_loss(f.logits, 1).dlogits);
    sgd_step(m, g, opt, cfg);
  }
}
BENCHMARK(BM_TrainStep);

// One population member scored on a cached split of `rows` slices.
void BM_CachedHeadAuc(benchmark::State& state) {
  SynthConfig sc;
  sc.n_patients = static_cast<std::uint32_t>(state.range(0));
  sc.seed = 6;
  const Dataset d = generate_synthetic(sc);
  const CnnModel m = make_model(1);
  const FeatureCache cache = build_feature_cache(m, d, 1);
  const ClassifierHead head = extract_head(m);
  for (auto _ : state) benchmark::DoNotOptimize(head_auc(head, cache));
  state.counters["rows"] = static_cast<double>(cache.rows());
}
BENCHMARK(BM_CachedHeadAuc)->Arg(30)->Arg(60);

void BM_Auc(benchmark::State& state) {
  RngStream rng(7);
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  std::vector<std::uint8_t> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform(0.0, 1.0);
    y[i] = static_cast<std::uint8_t>(rng.below(2));
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(s, y));
}
BENCHMARK(BM_Auc)->Arg(600)->Arg(10000);

}  // namespace
}  // namespace evoroc

BENCHMARK_MAIN();
