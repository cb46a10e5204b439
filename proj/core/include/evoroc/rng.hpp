#pragma once

#include <cstdint>
#include <random>
#include <initializer_list>

namespace evoroc {

std::uint64_t splitmix64(std::uint64_t x);

// Order-sensitive combination of a master seed with a path of stream ids,
// e.g. derive_seed(master, {kDropoutStream, epoch, sample}).
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Deterministic random stream. The engine is std::mt19937_64 (bit-exact across
// standard libraries); the conversions to floating point are done here rather
// than through <random> distributions, whose output is implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}
  RngStream(std::uint64_t master, std::initializer_list<std::uint64_t> path)
      : RngStream(derive_seed(master, path)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform on [0, 1) with 24 random bits; exactly representable as float.
  float uniform_float() { return static_cast<float>(engine_() >> 40) * 0x1.0p-24f; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n) by rejection, n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream-id tags so independent consumers of one master seed never share draws.
namespace stream {
inline constexpr std::uint64_t kModelInit = 0x4d4f444c;
inline constexpr std::uint64_t kShuffle = 0x53485546;
inline constexpr std::uint64_t kDropout = 0x44524f50;
inline constexpr std::uint64_t kSplit = 0x53504c54;
inline constexpr std::uint64_t kSynth = 0x53594e54;
inline constexpr std::uint64_t kPopulation = 0x504f5055;
inline constexpr std::uint64_t kReproduce = 0x52455052;
}  // namespace stream

}  // namespace evoroc
