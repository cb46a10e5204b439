#include "evoroc/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "evoroc/binary_io.hpp"

namespace evoroc {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'O', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kPlane = kSliceSize * kSliceSize;
constexpr std::size_t kSlicePixels = kSliceChannels * kPlane;
constexpr std::size_t kCoarse = 8;  // background control grid is 8x8, upsampled bilinearly

using Plane = std::vector<double>;

Plane smooth_field(RngStream& rng, double std_dev) {
  std::array<double, (kCoarse + 1) * (kCoarse + 1)> grid{};
  for (double& g : grid) g = std_dev * rng.normal();
  Plane field(kPlane);
  const double cell = static_cast<double>(kSliceSize) / static_cast<double>(kCoarse);
  for (std::size_t y = 0; y < kSliceSize; ++y) {
    const double gy = (static_cast<double>(y) + 0.5) / cell;
    const std::size_t y0 = std::min(static_cast<std::size_t>(gy), kCoarse - 1);
    const double ty = gy - static_cast<double>(y0);
    for (std::size_t x = 0; x < kSliceSize; ++x) {
      const double gx = (static_cast<double>(x) + 0.5) / cell;
      const std::size_t x0 = std::min(static_cast<std::size_t>(gx), kCoarse - 1);
      const double tx = gx - static_cast<double>(x0);
      const auto g = [&](std::size_t r, std::size_t c) { return grid[r * (kCoarse + 1) + c]; };
      const double top = g(y0, x0) * (1 - tx) + g(y0, x0 + 1) * tx;
      const double bottom = g(y0 + 1, x0) * (1 - tx) + g(y0 + 1, x0 + 1) * tx;
      field[y * kSliceSize + x] = top * (1 - ty) + bottom * ty;
    }
  }
  return field;
}

SliceRecord make_slice(const std::array<Plane, kSliceChannels>& background, bool positive,
                       const SynthConfig& cfg, RngStream& rng) {
  std::array<Plane, kSliceChannels> planes = background;
  for (Plane& p : planes) {
    for (double& v : p) v += cfg.noise_std * rng.normal();
  }
  if (positive) {
    const double radius = rng.uniform(6.0, 12.0);
    const double cy = rng.uniform(radius, static_cast<double>(kSliceSize) - radius);
    const double cx = rng.uniform(radius, static_cast<double>(kSliceSize) - radius);
    // Random subset of 3..6 channels via a partial Fisher-Yates shuffle.
    std::array<std::size_t, kSliceChannels> channels{};
    std::iota(channels.begin(), channels.end(), std::size_t{0});
    const std::size_t count = 3 + static_cast<std::size_t>(rng.below(kSliceChannels - 2));
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(channels[i], channels[i + static_cast<std::size_t>(rng.below(kSliceChannels - i))]);
    }
    for (std::size_t i = 0; i < count; ++i) {
      Plane& p = planes[channels[i]];
      for (std::size_t y = 0; y < kSliceSize; ++y) {
        for (std::size_t x = 0; x < kSliceSize; ++x) {
          const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
          p[y * kSliceSize + x] += cfg.amplitude * std::exp(-(dy * dy + dx * dx) / (2 * radius * radius));
        }
      }
    }
  }
  SliceRecord rec;
  rec.label = positive ? 1 : 0;
  rec.pixels = Tensor({kSliceChannels, kSliceSize, kSliceSize});
  for (std::size_t c = 0; c < kSliceChannels; ++c) {
    const Plane& p = planes[c];
    double mean = 0;
    for (double v : p) mean += v;
    mean /= static_cast<double>(kPlane);
    double var = 0;
    for (double v : p) var += (v - mean) * (v - mean);
    var /= static_cast<double>(kPlane);
    const double inv = var > 0 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t i = 0; i < kPlane; ++i) rec.pixels[c * kPlane + i] = static_cast<float>((p[i] - mean) * inv);
  }
  return rec;
}

void require_both_classes(const Dataset& d, const char* name) {
  std::size_t pos = 0;
  for (const SliceRecord& s : d.slices) pos += s.label;
  require(pos > 0 && pos < d.size(), ErrorCode::kAucUndefined,
          std::string(name) + " split has a single class (" + std::to_string(pos) + " of " +
              std::to_string(d.size()) + " positive)");
}

}  // namespace

void SynthConfig::validate() const {
  require(n_patients >= 3, ErrorCode::kInvalidArgument, "n_patients must be >= 3");
  require(min_slices >= 1 && min_slices <= max_slices, ErrorCode::kInvalidArgument,
          "slices per patient range must satisfy 1 <= min <= max");
  require(positive_fraction > 0 && positive_fraction < 1, ErrorCode::kInvalidArgument,
          "positive fraction must be in (0,1)");
  require(amplitude >= 0, ErrorCode::kInvalidArgument, "amplitude must be >= 0");
  require(noise_std > 0, ErrorCode::kInvalidArgument, "noise std must be > 0");
}

void SplitSpec::validate() const {
  require(train > 0 && val > 0 && test > 0, ErrorCode::kInvalidArgument, "split fractions must be positive");
  require(std::abs(train + val + test - 1.0) <= 1e-9, ErrorCode::kInvalidArgument,
          "split fractions must sum to 1");
}

std::vector<std::uint8_t> Dataset::labels() const {
  std::vector<std::uint8_t> out;
  out.reserve(slices.size());
  for (const SliceRecord& s : slices) out.push_back(s.label);
  return out;
}

std::vector<std::uint32_t> Dataset::patient_ids() const {
  std::vector<std::uint32_t> out;
  std::set<std::uint32_t> seen;
  for (const SliceRecord& s : slices) {
    if (seen.insert(s.patient_id).second) out.push_back(s.patient_id);
  }
  return out;
}

bool same_records(const Dataset& a, const Dataset& b) { return a.slices == b.slices; }

Dataset generate_synthetic(const SynthConfig& config) {
  config.validate();
  Dataset d;
  d.meta = {true, config};
  for (std::uint32_t pid = 0; pid < config.n_patients; ++pid) {
    RngStream rng(config.seed, {stream::kSynth, pid});
    std::array<Plane, kSliceChannels> background;
    for (Plane& b : background) b = smooth_field(rng, config.noise_std);
    const auto n_slices = config.min_slices + static_cast<std::uint32_t>(rng.below(config.max_slices - config.min_slices + 1));
    for (std::uint32_t s = 0; s < n_slices; ++s) {
      const bool positive = rng.bernoulli(config.positive_fraction);
      SliceRecord rec = make_slice(background, positive, config, rng);
      rec.patient_id = pid;
      d.slices.push_back(std::move(rec));
    }
  }
  return d;
}

std::array<std::size_t, 3> allocate_counts(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const std::array<double, 3> fractions = {spec.train, spec.val, spec.test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) counts[order[i % 3]] += 1;
  return counts;
}

DatasetSplits split_by_patient(const Dataset& dataset, const SplitSpec& spec, RngStream& rng) {
  std::vector<std::uint32_t> patients = dataset.patient_ids();
  require(patients.size() >= 3, ErrorCode::kInvalidArgument,
          "need at least 3 patients to split, got " + std::to_string(patients.size()));
  for (std::size_t i = patients.size(); i > 1; --i) {
    std::swap(patients[i - 1], patients[static_cast<std::size_t>(rng.below(i))]);
  }
  const std::array<std::size_t, 3> counts = allocate_counts(patients.size(), spec);
  const char* names[3] = {"train", "validation", "test"};
  for (std::size_t i = 0; i < 3; ++i) {
    require(counts[i] > 0, ErrorCode::kInvalidArgument, std::string(names[i]) + " split received no patients");
  }
  std::unordered_map<std::uint32_t, int> assignment;
  std::size_t k = 0;
  for (int split = 0; split < 3; ++split) {
    for (std::size_t j = 0; j < counts[static_cast<std::size_t>(split)]; ++j) assignment[patients[k++]] = split;
  }
  DatasetSplits out;
  Dataset* targets[3] = {&out.train, &out.val, &out.test};
  for (const SliceRecord& s : dataset.slices) targets[assignment.at(s.patient_id)]->slices.push_back(s);
  for (std::size_t i = 0; i < 3; ++i) {
    targets[i]->meta = dataset.meta;
    require_both_classes(*targets[i], names[i]);
  }
  return out;
}

DatasetSplits split_for_seed(const Dataset& dataset, std::uint64_t master_seed, const SplitSpec& spec) {
  RngStream rng(master_seed, {stream::kSplit});
  return split_by_patient(dataset, spec, rng);
}

std::string serialize_dataset(const Dataset& dataset) {
  ByteWriter w;
  w.bytes({kMagic, 4});
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  w.u16(kSliceChannels);
  w.u16(kSliceSize);
  w.u16(kSliceSize);
  w.u16(0);
  for (const SliceRecord& s : dataset.slices) {
    require(s.pixels.shape() == Shape{kSliceChannels, kSliceSize, kSliceSize}, ErrorCode::kShapeMismatch,
            "slice pixels must be (6,64,64), got " + shape_string(s.pixels.shape()));
    w.u32(s.patient_id);
    w.u8(s.label);
    w.u8(0);
    w.u8(0);
    w.u8(0);
    for (float v : s.pixels.values()) w.f32(v);
  }
  w.u64(xxhash64(w.buffer()));
  return w.take();
}

Dataset deserialize_dataset(std::string_view bytes) {
  ByteReader r(bytes);
  require(r.bytes(4) == std::string_view(kMagic, 4), ErrorCode::kBadMagic, "not an EVOD dataset file");
  const std::uint32_t version = r.u32();
  require(version == kVersion, ErrorCode::kVersionMismatch,
          "EVOD version " + std::to_string(version) + ", supported " + std::to_string(kVersion));
  const std::uint32_t n = r.u32();
  const std::uint16_t channels = r.u16(), height = r.u16(), width = r.u16();
  r.u16();
  require(channels == kSliceChannels && height == kSliceSize && width == kSliceSize, ErrorCode::kShapeMismatch,
          "EVOD slices are " + std::to_string(channels) + "x" + std::to_string(height) + "x" +
              std::to_string(width) + ", expected 6x64x64");
  const std::size_t per_slice = 8 + 4 * kSlicePixels;
  require(r.remaining() >= static_cast<std::size_t>(n) * per_slice + 8, ErrorCode::kTruncated,
          "EVOD file shorter than its " + std::to_string(n) + " declared slices");
  Dataset d;
  d.slices.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    SliceRecord s;
    s.patient_id = r.u32();
    s.label = r.u8();
    r.bytes(3);
    require(s.label <= 1, ErrorCode::kInvalidArgument, "slice " + std::to_string(i) + " has label not in {0,1}");
    std::vector<float> px(kSlicePixels);
    for (float& v : px) v = r.f32();
    s.pixels = Tensor({kSliceChannels, kSliceSize, kSliceSize}, std::move(px));
    d.slices.push_back(std::move(s));
  }
  const std::size_t body = r.position();
  const std::uint64_t stored = r.u64();
  require(r.remaining() == 0, ErrorCode::kInvalidArgument, "trailing bytes after EVOD checksum");
  require(stored == xxhash64(bytes.substr(0, body)), ErrorCode::kChecksumMismatch, "EVOD checksum does not match contents");
  return d;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file(path, serialize_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_file(path)); }

}  // namespace evoroc
