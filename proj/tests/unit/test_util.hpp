#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "evoroc/data.hpp"
#include "evoroc/rng.hpp"
#include "evoroc/tensor.hpp"

namespace evoroc::test {

inline TensorD random_tensor(const Shape& shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline double contract(const TensorD& a, const TensorD& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Max relative error between `analytic` and central differences of `f` with
// respect to every element of `x` (or `limit` evenly spaced ones).
inline double fd_check(TensorD& x, const TensorD& analytic, const std::function<double()>& f, double h = 1e-3,
                       std::size_t limit = 0) {
  const std::size_t n = x.size();
  const std::size_t stride = limit == 0 || limit >= n ? 1 : n / limit;
  double worst = 0;
  for (std::size_t i = 0; i < n; i += stride) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2 * h)));
  }
  return worst;
}

// A few patients with few slices: enough for both classes in every split.
inline Dataset tiny_dataset(std::uint64_t seed, std::uint32_t patients = 12, double amplitude = 1.0) {
  SynthConfig c;
  c.n_patients = patients;
  c.min_slices = 3;
  c.max_slices = 5;
  c.amplitude = amplitude;
  c.seed = seed;
  return generate_synthetic(c);
}

}  // namespace evoroc::test
