#pragma once

// Order-independent summation. Every term is rounded once onto a fixed-point
// lattice of spacing 2^-64 and accumulated in a 128-bit integer, so the result
// is the same bit pattern for any permutation of the terms and any split of
// the work across threads. Terms with |x| >= 2^30 fall back to a plain double
// accumulator and lose that guarantee.

#include <cmath>
#include <cstdint>
#include <span>

namespace chaoslab {

class ExactSum {
 public:
  static constexpr double kMaxMagnitude = 1073741824.0;  // 2^30

  void add(double x) noexcept {
    if (!(std::abs(x) < kMaxMagnitude)) {
      overflow_ += x;
      return;
    }
    // x * 2^32 is exact; split into an integer high part and a remainder
    // in [-0.5, 0.5] which is then rounded at 2^-32 (2^-64 overall).
    const double scaled = x * 4294967296.0;
    const double hi = std::nearbyint(scaled);
    const double lo = std::nearbyint((scaled - hi) * 4294967296.0);
    acc_ += (static_cast<__int128>(static_cast<std::int64_t>(hi)) << 32) +
            static_cast<__int128>(static_cast<std::int64_t>(lo));
  }

  void merge(const ExactSum& other) noexcept {
    acc_ += other.acc_;
    overflow_ += other.overflow_;
  }

  double value() const noexcept {
    // __int128 -> double rounds correctly; the scale is a power of two.
    return static_cast<double>(acc_) * 0x1p-64 + overflow_;
  }

  __int128 raw() const noexcept { return acc_; }

 private:
  __int128 acc_ = 0;
  double overflow_ = 0.0;
};

inline double exact_sum(std::span<const double> xs) noexcept {
  ExactSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

}  // namespace chaoslab
