#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evoroc/data.hpp"
#include "evoroc/model.hpp"

namespace evoroc {

// The fully connected classifier evolved by the GA; one population member.
struct ClassifierHead {
  LinearLayerParams fc1, fc2, fc3;

  LinearLayerParams& layer(std::size_t i) { return i == 0 ? fc1 : i == 1 ? fc2 : fc3; }
  const LinearLayerParams& layer(std::size_t i) const { return i == 0 ? fc1 : i == 1 ? fc2 : fc3; }

  friend bool operator==(const ClassifierHead&, const ClassifierHead&) = default;
};

inline constexpr std::size_t kHeadLayers = 3;

// Throws unless fc1..fc3 have the (1024->256), (256->64), (64->2) shapes.
void validate_head_architecture(const ClassifierHead& head);

ClassifierHead extract_head(const CnnModel& model);
// Copy of `model` with its fully connected layers replaced by `head`.
CnnModel with_head(const CnnModel& model, const ClassifierHead& head);

// Frozen convolutional features of a split, one 1024-wide row per slice.
struct FeatureCache {
  Tensor features;  // (N, 1024)
  std::vector<std::uint8_t> labels;
  std::vector<std::uint32_t> patient_ids;

  std::size_t rows() const { return labels.size(); }
};

FeatureCache build_feature_cache(const CnnModel& model, const Dataset& split, std::size_t threads = 0);

// fc1 -> ReLU -> fc2 -> ReLU -> fc3 logits, one row per cache row: (N, 2).
Tensor head_logits(const ClassifierHead& head, const Tensor& features);
// Class-1 log-odds (see positive_log_odds) per cache row.
std::vector<double> head_scores(const ClassifierHead& head, const FeatureCache& cache);
double head_auc(const ClassifierHead& head, const FeatureCache& cache);

struct EvoConfig {
  std::size_t population_size = 512;
  double mutation_probability = 0.01;
  std::size_t max_generations = 50;
  std::uint64_t master_seed = 0;
  std::size_t threads = 0;  // fitness fan-out; 0 = auto

  void validate() const;
};

struct Population {
  std::vector<ClassifierHead> members;
  std::optional<std::vector<double>> fitness;  // training AUC per member once evaluated
};

// members[0] is an exact copy of seed_head; the rest are i.i.d. U[0,1) in
// every weight and bias.
Population init_population(const ClassifierHead& seed_head, const EvoConfig& config, RngStream& rng);

// AUC of every member on the cache. Members are scored concurrently, results
// are written per member so the output does not depend on the thread count.
std::vector<double> evaluate_fitness(const std::vector<ClassifierHead>& members, const FeatureCache& cache,
                                     std::size_t threads = 0);
void evaluate_fitness(Population& population, const FeatureCache& cache, std::size_t threads = 0);

// Indices sorted by fitness descending, ties by lower index.
std::vector<std::size_t> rank_order(const std::vector<double>& fitness);
// Top half of an evaluated population, in rank order.
std::vector<ClassifierHead> rank_select(const Population& population);

// Child takes layers 1..cut from parent_a and the rest from parent_b; cut is 1 or 2.
ClassifierHead crossover_layers(const ClassifierHead& parent_a, const ClassifierHead& parent_b, int cut);

// Independently per layer, with probability p, replaces the whole layer
// (weights and bias) with fresh U[0,1) values. Returns a bitmask of the
// replaced layers (bit i = fc{i+1}).
unsigned mutate_layers_inplace(ClassifierHead& head, double p, RngStream& rng);
ClassifierHead mutate_layers(const ClassifierHead& head, double p, RngStream& rng);

// Where each member of a new generation came from.
struct Provenance {
  enum class Kind { kSurvivor, kCrossover, kMutant } kind;
  std::size_t parent_a = 0;  // index into the survivors
  std::size_t parent_b = 0;  // crossover only
  int cut = 0;               // crossover only
  unsigned mutated = 0;      // mutant only; 0 means a verbatim copy of parent_a
};

struct Offspring {
  Population population;
  std::vector<Provenance> provenance;
};

// survivors (verbatim) + population_size/4 crossover children of distinct
// uniformly drawn survivor pairs at a uniformly drawn cut + population_size/4
// mutated copies of uniformly drawn survivors.
Offspring next_generation_traced(const std::vector<ClassifierHead>& survivors, const EvoConfig& config,
                                 RngStream& rng);
Population next_generation(const std::vector<ClassifierHead>& survivors, const EvoConfig& config, RngStream& rng);

struct GenerationStats {
  std::size_t generation = 0;
  double max_train_auc = 0;
  double mean_train_auc = 0;
  double max_val_auc = 0;
  std::size_t best_index = 0;  // member with the highest training AUC (lowest index on ties)

  friend bool operator==(const GenerationStats&, const GenerationStats&) = default;
};

struct EvolveResult {
  ClassifierHead best;
  std::size_t best_generation = 0;
  std::size_t best_index = 0;
  double best_train_auc = 0;
  double best_val_auc = 0;
  double seed_train_auc = 0;
  double seed_val_auc = 0;
  std::vector<GenerationStats> stats;
};

std::string stats_csv(const std::vector<GenerationStats>& stats);

// Runs the GA. Generation 0 is seeded with the model's own head; the loop
// stops after the first generation that raises neither the running maximum
// training AUC nor the running maximum validation AUC (strictly), or at
// max_generations. The returned head is the member of any generation with the
// highest validation AUC, ties broken by training AUC, then by earliest
// generation and lowest index.
EvolveResult evolve(const FeatureCache& train_cache, const FeatureCache& val_cache, const ClassifierHead& seed_head,
                    const EvoConfig& config);
EvolveResult evolve(const CnnModel& model, const Dataset& train_split, const Dataset& val_split,
                    const EvoConfig& config);

// EVOM file holding fc1.w .. fc3.b only. Loading also accepts a full model file.
std::string serialize_head(const ClassifierHead& head);
ClassifierHead deserialize_head(std::string_view bytes);
void save_head(const ClassifierHead& head, const std::filesystem::path& path);
ClassifierHead load_head(const std::filesystem::path& path);

}  // namespace evoroc
