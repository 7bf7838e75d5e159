// Deterministic random streams.
//
// All stochastic pieces of the simulator draw from Rng, a thin wrapper
// around std::mt19937_64 with hand-rolled distributions. The engine is
// fully specified by the C++ standard and the distributions below are
// implemented here, so a given seed produces identical streams on every
// platform/compiler. Sub-streams are derived by hashing (seed, ids...),
// which keeps blocks independent and generation parallelizable.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qttf {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic sub-seed from a root seed and an id path.
template <typename... Ids>
std::uint64_t derive_seed(std::uint64_t root, Ids... ids) {
  std::uint64_t state = root ^ 0xA0761D6478BD642Full;
  ((state = detail::splitmix64(state) ^ static_cast<std::uint64_t>(ids)), ...);
  return detail::splitmix64(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method; caches the spare deviate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Poisson deviate. Inversion for small means, Hormann's PTRS transformed
  // rejection for large ones (exact, no normal approximation).
  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 10.0) return poisson_inversion(mean);
    return poisson_ptrs(mean);
  }

 private:
  std::int64_t poisson_inversion(double mean) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::int64_t poisson_ptrs(double mean) {
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      const double lhs = std::log(v * invalpha / (a / (us * us) + b));
      const double rhs = kf * loglam - mean - std::lgamma(kf + 1.0);
      if (lhs <= rhs) return static_cast<std::int64_t>(kf);
    }
  }

  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qttf
