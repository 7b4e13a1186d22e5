#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "hebbpca/types.hpp"

namespace hebbpca {

/// splitmix64 (Steele, Lea, Flood). The stream is fully determined by the
/// seed, so any implementation with the same constants reproduces it.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1): top 53 bits of one draw.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Standard normals by Box-Muller over a SplitMix64 stream. Each pair of
/// draws (u1, u2) yields r cos(2 pi u2) first and r sin(2 pi u2) second,
/// with r = sqrt(-2 ln(1 - u1)).
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : bits_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - bits_.uniform();  // (0, 1]
    const double u2 = bits_.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  /// Uniform on [0, 1) from the same underlying stream.
  double uniform() { return bits_.uniform(); }

  /// rows x cols matrix filled row by row.
  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = next();
    return m;
  }

 private:
  SplitMix64 bits_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hebbpca
