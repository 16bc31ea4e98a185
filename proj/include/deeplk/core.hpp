#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace deeplk {

/// Malformed or inconsistent input data (files, sequences, checkpoints).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (singular normal matrix, non-finite loss, degenerate warp).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic random source. All randomness in the library flows through
/// an explicitly seeded Rng so that every run is reproducible bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw strictly inside (0, 1).
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Laplace(0, scale) via the inverse CDF.
  double laplace(double scale) {
    if (scale <= 0.0) throw std::invalid_argument("laplace: scale must be > 0");
    return laplace_from_uniform(uniform01() - 0.5, scale);
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  /// x = -b * sign(u) * ln(1 - 2|u|) for u in (-1/2, 1/2).
  static double laplace_from_uniform(double u, double scale) {
    const double sign = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    return -scale * sign * std::log(1.0 - 2.0 * std::abs(u));
  }

 private:
  std::mt19937_64 engine_;
};

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(items[i - 1], items[j]);
  }
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace deeplk
