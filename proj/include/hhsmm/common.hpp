#ifndef HHSMM_COMMON_HPP
#define HHSMM_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hhsmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = std::vector<int>;

/// Marker for a missing observation cell.
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid inputs, malformed files, or model-specification violations.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Numerical failures (underflow, singular systems, divergence).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Seedable random source. Independent per-sequence streams are derived
/// from a master seed by hashing the stream index (splitmix64 of
/// seed xor index), so stream i is reproducible regardless of how many
/// draws the other streams consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(detail::splitmix64(seed)) {}

  /// Substream for sequence/restart `index` under master seed `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(detail::splitmix64(seed) ^ detail::splitmix64(index + 1));
  }

  std::mt19937_64& engine() { return engine_; }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  double normal() {
    return std::normal_distribution<double>(0.0, 1.0)(engine_);
  }
  /// Index draw from unnormalized nonnegative weights.
  int categorical(const Vector& w) {
    double total = w.sum();
    if (!(total > 0.0)) throw NumericError("categorical draw from all-zero weights");
    double u = uniform() * total, acc = 0.0;
    for (int i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u <= acc) return i;
    }
    return static_cast<int>(w.size()) - 1;
  }
  /// Uniform integer in [0, n).
  int index(int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(engine_);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hhsmm

#endif  // HHSMM_COMMON_HPP
