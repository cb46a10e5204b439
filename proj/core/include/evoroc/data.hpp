#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evoroc/rng.hpp"
#include "evoroc/tensor.hpp"

namespace evoroc {

inline constexpr std::size_t kSliceChannels = 6;
inline constexpr std::size_t kSliceSize = 64;

struct SliceRecord {
  Tensor pixels;  // (6, 64, 64)
  std::uint8_t label = 0;
  std::uint32_t patient_id = 0;

  friend bool operator==(const SliceRecord&, const SliceRecord&) = default;
};

struct SynthConfig {
  std::uint32_t n_patients = 60;
  std::uint32_t min_slices = 8;
  std::uint32_t max_slices = 14;
  double positive_fraction = 0.4;
  double amplitude = 1.0;  // lesion blob peak, in units of the pre-standardization noise
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Generation parameters. The file format does not carry them, so a loaded
// dataset has has_metadata == false; run manifests record them instead.
struct DatasetMetadata {
  bool has_metadata = false;
  SynthConfig synth;
};

struct Dataset {
  std::vector<SliceRecord> slices;
  DatasetMetadata meta;

  std::size_t size() const noexcept { return slices.size(); }
  bool empty() const noexcept { return slices.empty(); }
  std::vector<std::uint8_t> labels() const;
  std::vector<std::uint32_t> patient_ids() const;  // distinct, in first-appearance order
};

// Records only; metadata is not part of equality.
bool same_records(const Dataset& a, const Dataset& b);

// Per patient: a smooth random background per channel (shared by that
// patient's slices) plus white noise; positive slices additionally carry a
// Gaussian blob in a random subset of at least three channels. Every slice
// channel is then standardized to zero mean and unit variance.
Dataset generate_synthetic(const SynthConfig& config);

struct SplitSpec {
  double train = 0.52;
  double val = 0.25;
  double test = 0.23;

  void validate() const;
};

struct DatasetSplits {
  Dataset train, val, test;
};

// Largest-remainder allocation of `n` items over fractions (ties go to the
// lower index).
std::array<std::size_t, 3> allocate_counts(std::size_t n, const SplitSpec& spec);

// Shuffles patients with `rng`, allocates whole patients to splits and keeps
// the original slice order inside each split. Fails if any split ends up with
// no patients or only one class.
DatasetSplits split_by_patient(const Dataset& dataset, const SplitSpec& spec, RngStream& rng);
// The split every pipeline stage derives from one master seed.
DatasetSplits split_for_seed(const Dataset& dataset, std::uint64_t master_seed, const SplitSpec& spec = {});

// EVOD container. See README for the byte layout.
std::string serialize_dataset(const Dataset& dataset);
Dataset deserialize_dataset(std::string_view bytes);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace evoroc
