#include "evoroc/evo.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "evoroc/binary_io.hpp"
#include "evoroc/checkpoint.hpp"
#include "evoroc/metrics.hpp"
#include "evoroc/parallel.hpp"

namespace evoroc {

namespace {

constexpr const char* kHeadNames[kHeadLayers][2] = {{"fc1.w", "fc1.b"}, {"fc2.w", "fc2.b"}, {"fc3.w", "fc3.b"}};

LinearLayerParams fresh_layer(const LinearLayerParams& like, RngStream& rng) {
  LinearLayerParams l;
  l.weights = uniform01_init(like.weights.shape(), rng);
  l.bias = uniform01_init(like.bias.shape(), rng);
  return l;
}

ClassifierHead random_head(RngStream& rng) {
  ClassifierHead h;
  LinearLayerParams* layers[3] = {&h.fc1, &h.fc2, &h.fc3};
  for (std::size_t i = 0; i < kHeadLayers; ++i) {
    layers[i]->weights = uniform01_init({arch::kFcDims[i + 1], arch::kFcDims[i]}, rng);
    layers[i]->bias = uniform01_init({arch::kFcDims[i + 1]}, rng);
  }
  return h;
}

void require_cache(const FeatureCache& cache, const char* name) {
  require(cache.rows() > 0, ErrorCode::kInvalidArgument, std::string(name) + " feature cache is empty");
  require(cache.features.ndim() == 2 && cache.features.extent(0) == cache.rows(), ErrorCode::kShapeMismatch,
          std::string(name) + " feature cache rows do not match its labels");
}

}  // namespace

void validate_head_architecture(const ClassifierHead& head) {
  for (std::size_t i = 0; i < kHeadLayers; ++i) {
    const Shape w{arch::kFcDims[i + 1], arch::kFcDims[i]}, b{arch::kFcDims[i + 1]};
    require(head.layer(i).weights.shape() == w, ErrorCode::kShapeMismatch,
            std::string(kHeadNames[i][0]) + " has shape " + shape_string(head.layer(i).weights.shape()) +
                ", expected " + shape_string(w));
    require(head.layer(i).bias.shape() == b, ErrorCode::kShapeMismatch,
            std::string(kHeadNames[i][1]) + " has shape " + shape_string(head.layer(i).bias.shape()) +
                ", expected " + shape_string(b));
  }
}

ClassifierHead extract_head(const CnnModel& model) {
  ClassifierHead h{model.fc1, model.fc2, model.fc3};
  validate_head_architecture(h);
  return h;
}

CnnModel with_head(const CnnModel& model, const ClassifierHead& head) {
  validate_head_architecture(head);
  CnnModel m = model;
  m.fc1 = head.fc1;
  m.fc2 = head.fc2;
  m.fc3 = head.fc3;
  ++m.revision;
  return m;
}

FeatureCache build_feature_cache(const CnnModel& model, const Dataset& split, std::size_t threads) {
  require(!split.empty(), ErrorCode::kInvalidArgument, "cannot build a feature cache from an empty split");
  const std::size_t n = split.size(), width = arch::kFeatureWidth;
  FeatureCache cache{Tensor({n, width}), split.labels(), {}};
  cache.patient_ids.reserve(n);
  for (const SliceRecord& s : split.slices) cache.patient_ids.push_back(s.patient_id);
  parallel_for(n, threads, [&](std::size_t i) {
    const Tensor f = extract_features(model, split.slices[i].pixels);
    std::copy(f.data(), f.data() + width, cache.features.data() + i * width);
  });
  return cache;
}

Tensor head_logits(const ClassifierHead& head, const Tensor& features) {
  require(features.ndim() == 2 && features.extent(1) == head.fc1.in_dim(), ErrorCode::kShapeMismatch,
          "feature matrix " + shape_string(features.shape()) + " does not match head input width " +
              std::to_string(head.fc1.in_dim()));
  Tensor h = linear_forward_rows(features, head.fc1);
  relu_inplace(h);
  h = linear_forward_rows(h, head.fc2);
  relu_inplace(h);
  return linear_forward_rows(h, head.fc3);
}

std::vector<double> head_scores(const ClassifierHead& head, const FeatureCache& cache) {
  require_cache(cache, "scoring");
  const Tensor logits = head_logits(head, cache.features);
  require(logits.extent(1) == 2, ErrorCode::kShapeMismatch, "head must emit two logits");
  std::vector<double> scores(cache.rows());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = positive_log_odds(logits.at(i, 0), logits.at(i, 1));
  return scores;
}

double head_auc(const ClassifierHead& head, const FeatureCache& cache) {
  return auc(head_scores(head, cache), cache.labels);
}

void EvoConfig::validate() const {
  require(population_size >= 4 && population_size % 4 == 0, ErrorCode::kInvalidArgument,
          "population size must be a positive multiple of 4, got " + std::to_string(population_size));
  require(mutation_probability >= 0 && mutation_probability <= 1, ErrorCode::kInvalidArgument,
          "mutation probability must be in [0,1]");
  require(max_generations >= 1, ErrorCode::kInvalidArgument, "max generations must be >= 1");
}

Population init_population(const ClassifierHead& seed_head, const EvoConfig& config, RngStream& rng) {
  config.validate();
  validate_head_architecture(seed_head);
  Population p;
  p.members.reserve(config.population_size);
  p.members.push_back(seed_head);
  while (p.members.size() < config.population_size) p.members.push_back(random_head(rng));
  return p;
}

std::vector<double> evaluate_fitness(const std::vector<ClassifierHead>& members, const FeatureCache& cache,
                                     std::size_t threads) {
  std::vector<double> fitness(members.size());
  parallel_for(members.size(), threads, [&](std::size_t i) { fitness[i] = head_auc(members[i], cache); });
  return fitness;
}

void evaluate_fitness(Population& population, const FeatureCache& cache, std::size_t threads) {
  population.fitness = evaluate_fitness(population.members, cache, threads);
}

std::vector<std::size_t> rank_order(const std::vector<double>& fitness) {
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
  return order;
}

std::vector<ClassifierHead> rank_select(const Population& population) {
  require(population.fitness.has_value() && population.fitness->size() == population.members.size(),
          ErrorCode::kInvalidArgument, "rank_select needs an evaluated population");
  const std::vector<std::size_t> order = rank_order(*population.fitness);
  std::vector<ClassifierHead> survivors;
  survivors.reserve(order.size() / 2);
  for (std::size_t i = 0; i < order.size() / 2; ++i) survivors.push_back(population.members[order[i]]);
  return survivors;
}

ClassifierHead crossover_layers(const ClassifierHead& parent_a, const ClassifierHead& parent_b, int cut) {
  require(cut == 1 || cut == 2, ErrorCode::kInvalidArgument,
          "crossover cut must be 1 or 2, got " + std::to_string(cut));
  ClassifierHead child = parent_b;
  child.fc1 = parent_a.fc1;
  if (cut == 2) child.fc2 = parent_a.fc2;
  return child;
}

unsigned mutate_layers_inplace(ClassifierHead& head, double p, RngStream& rng) {
  require(p >= 0 && p <= 1, ErrorCode::kInvalidArgument, "mutation probability must be in [0,1]");
  unsigned mask = 0;
  for (std::size_t i = 0; i < kHeadLayers; ++i) {
    if (rng.bernoulli(p)) {
      head.layer(i) = fresh_layer(head.layer(i), rng);
      mask |= 1u << i;
    }
  }
  return mask;
}

ClassifierHead mutate_layers(const ClassifierHead& head, double p, RngStream& rng) {
  ClassifierHead out = head;
  mutate_layers_inplace(out, p, rng);
  return out;
}

Offspring next_generation_traced(const std::vector<ClassifierHead>& survivors, const EvoConfig& config,
                                 RngStream& rng) {
  config.validate();
  const std::size_t half = config.population_size / 2, quarter = config.population_size / 4;
  require(survivors.size() == half, ErrorCode::kInvalidArgument,
          "expected " + std::to_string(half) + " survivors, got " + std::to_string(survivors.size()));
  Offspring out;
  out.population.members.reserve(config.population_size);
  out.provenance.reserve(config.population_size);
  for (std::size_t i = 0; i < half; ++i) {
    out.population.members.push_back(survivors[i]);
    out.provenance.push_back({Provenance::Kind::kSurvivor, i});
  }
  for (std::size_t j = 0; j < quarter; ++j) {
    const std::size_t a = rng.below(half);
    std::size_t b = rng.below(half - 1);
    if (b >= a) ++b;
    const int cut = 1 + static_cast<int>(rng.below(2));
    out.population.members.push_back(crossover_layers(survivors[a], survivors[b], cut));
    out.provenance.push_back({Provenance::Kind::kCrossover, a, b, cut});
  }
  for (std::size_t j = 0; j < quarter; ++j) {
    const std::size_t a = rng.below(half);
    ClassifierHead child = survivors[a];
    const unsigned mask = mutate_layers_inplace(child, config.mutation_probability, rng);
    out.population.members.push_back(std::move(child));
    Provenance prov{Provenance::Kind::kMutant, a};
    prov.mutated = mask;
    out.provenance.push_back(prov);
  }
  return out;
}

Population next_generation(const std::vector<ClassifierHead>& survivors, const EvoConfig& config, RngStream& rng) {
  return next_generation_traced(survivors, config, rng).population;
}

std::string stats_csv(const std::vector<GenerationStats>& stats) {
  std::string out = "generation,max_train_auc,mean_train_auc,max_val_auc,best_index\n";
  for (const GenerationStats& s : stats) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{}\n", s.generation, s.max_train_auc, s.mean_train_auc,
                       s.max_val_auc, s.best_index);
  }
  return out;
}

EvolveResult evolve(const FeatureCache& train_cache, const FeatureCache& val_cache, const ClassifierHead& seed_head,
                    const EvoConfig& config) {
  config.validate();
  require_cache(train_cache, "train");
  require_cache(val_cache, "validation");

  RngStream init_rng(config.master_seed, {stream::kPopulation});
  Population population = init_population(seed_head, config, init_rng);
  std::vector<double> train_fit = evaluate_fitness(population.members, train_cache, config.threads);
  std::vector<double> val_fit = evaluate_fitness(population.members, val_cache, config.threads);

  EvolveResult result;
  result.seed_train_auc = train_fit[0];
  result.seed_val_auc = val_fit[0];
  result.best_val_auc = -1.0;
  double running_train = -std::numeric_limits<double>::infinity();
  double running_val = -std::numeric_limits<double>::infinity();

  for (std::size_t gen = 0;; ++gen) {
    GenerationStats s;
    s.generation = gen;
    const std::vector<std::size_t> order = rank_order(train_fit);
    s.best_index = order.front();
    s.max_train_auc = train_fit[order.front()];
    s.mean_train_auc = std::accumulate(train_fit.begin(), train_fit.end(), 0.0) / static_cast<double>(train_fit.size());
    s.max_val_auc = *std::max_element(val_fit.begin(), val_fit.end());
    result.stats.push_back(s);

    for (std::size_t i = 0; i < population.members.size(); ++i) {
      if (val_fit[i] > result.best_val_auc ||
          (val_fit[i] == result.best_val_auc && train_fit[i] > result.best_train_auc)) {
        result.best_val_auc = val_fit[i];
        result.best_train_auc = train_fit[i];
        result.best_generation = gen;
        result.best_index = i;
        result.best = population.members[i];
      }
    }

    const bool improved = s.max_train_auc > running_train || s.max_val_auc > running_val;
    running_train = std::max(running_train, s.max_train_auc);
    running_val = std::max(running_val, s.max_val_auc);
    if (!improved || gen + 1 >= config.max_generations) break;

    population.fitness = train_fit;
    std::vector<ClassifierHead> survivors = rank_select(population);
    RngStream rng(config.master_seed, {stream::kReproduce, gen + 1});
    Offspring next = next_generation_traced(survivors, config, rng);

    // Fitness is a pure function of the member, so verbatim copies inherit
    // their parent's scores and only new heads are evaluated.
    std::vector<double> next_train(next.population.members.size()), next_val(next_train.size());
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < next.provenance.size(); ++i) {
      const Provenance& p = next.provenance[i];
      const bool verbatim = p.kind == Provenance::Kind::kSurvivor || (p.kind == Provenance::Kind::kMutant && p.mutated == 0);
      if (verbatim) {
        next_train[i] = train_fit[order[p.parent_a]];
        next_val[i] = val_fit[order[p.parent_a]];
      } else {
        fresh.push_back(i);
      }
    }
    std::vector<ClassifierHead> fresh_members;
    fresh_members.reserve(fresh.size());
    for (std::size_t i : fresh) fresh_members.push_back(next.population.members[i]);
    const std::vector<double> ft = evaluate_fitness(fresh_members, train_cache, config.threads);
    const std::vector<double> fv = evaluate_fitness(fresh_members, val_cache, config.threads);
    for (std::size_t k = 0; k < fresh.size(); ++k) {
      next_train[fresh[k]] = ft[k];
      next_val[fresh[k]] = fv[k];
    }
    population = std::move(next.population);
    train_fit = std::move(next_train);
    val_fit = std::move(next_val);
  }
  return result;
}

EvolveResult evolve(const CnnModel& model, const Dataset& train_split, const Dataset& val_split,
                    const EvoConfig& config) {
  const FeatureCache train_cache = build_feature_cache(model, train_split, config.threads);
  const FeatureCache val_cache = build_feature_cache(model, val_split, config.threads);
  return evolve(train_cache, val_cache, extract_head(model), config);
}

std::string serialize_head(const ClassifierHead& head) {
  validate_head_architecture(head);
  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < kHeadLayers; ++i) {
    tensors.emplace_back(kHeadNames[i][0], head.layer(i).weights);
    tensors.emplace_back(kHeadNames[i][1], head.layer(i).bias);
  }
  return serialize_tensors(tensors);
}

ClassifierHead deserialize_head(std::string_view bytes) {
  std::map<std::string, Tensor, std::less<>> by_name;
  for (auto& [name, t] : deserialize_tensors(bytes)) by_name.insert_or_assign(name, std::move(t));
  ClassifierHead head;
  for (std::size_t i = 0; i < kHeadLayers; ++i) {
    for (int j = 0; j < 2; ++j) {
      auto it = by_name.find(kHeadNames[i][j]);
      require(it != by_name.end(), ErrorCode::kInvalidArgument,
              std::string("checkpoint lacks tensor ") + kHeadNames[i][j]);
      (j == 0 ? head.layer(i).weights : head.layer(i).bias) = std::move(it->second);
    }
  }
  validate_head_architecture(head);
  return head;
}

void save_head(const ClassifierHead& head, const std::filesystem::path& path) {
  write_file(path, serialize_head(head));
}

ClassifierHead load_head(const std::filesystem::path& path) { return deserialize_head(read_file(path)); }

}  // namespace evoroc
