#pragma once

// Coefficient fields flattened for hot loops. For trigonometric series the
// pairwise mean (1/N) sum_j f(v_i - v_j) only needs, per wave vector k, the
// ensemble moments C = mean_j cos(2 pi k.v_j) and S = mean_j sin(2 pi k.v_j):
//   cos(2 pi k.(v_i - v_j)) = c_i c_j + s_i s_j,  sin(...) = s_i c_j - c_i s_j.

#include <array>
#include <cmath>
#include <vector>

#include "chaoslab/coefficients.hpp"

namespace chaoslab::kernels {

struct PairwiseSeries {
  int dim = 1;
  std::vector<std::array<int, kMaxDim>> waves;
  // Per wave, row-major coefficient blocks; absent modes are zero.
  std::vector<double> b_cos, b_sin;    // waves x d
  std::vector<double> a1_cos, a1_sin;  // waves x d*d
  std::vector<double> a2_cos, a2_sin;  // waves x d*d
  std::vector<double> b0, a10, a20;
  // Waves that appear in b or a2 need ensemble moments.
  std::vector<char> pairwise;

  static PairwiseSeries compile(const CoefficientSet& cs);
};

// sin and cos of 2 pi x, accurate to a few ulp for |x| < 2^40. Branch-free so
// loops over particles vectorize.
inline void sincos_2pi(double x, double& s, double& c) noexcept {
  const double r = x - std::nearbyint(x);                     // [-1/2, 1/2]
  const double q = std::nearbyint(4.0 * r);                   // quadrant in {-2..2}
  const double t = 6.283185307179586477 * (r - 0.25 * q);     // [-pi/4, pi/4]
  const double t2 = t * t;
  const double sp =
      t * (1.0 + t2 * (-1.0 / 6 + t2 * (1.0 / 120 + t2 * (-1.0 / 5040 + t2 * (1.0 / 362880 +
      t2 * (-1.0 / 39916800 + t2 * (1.0 / 6227020800.0 + t2 * (-1.0 / 1307674368000.0))))))));
  const double cp =
      1.0 + t2 * (-0.5 + t2 * (1.0 / 24 + t2 * (-1.0 / 720 + t2 * (1.0 / 40320 + t2 * (-1.0 / 3628800 +
      t2 * (1.0 / 479001600.0 + t2 * (-1.0 / 87178291200.0 + t2 * (1.0 / 20922789888000.0))))))));
  const auto quadrant = static_cast<long>(q) & 3;
  const bool swap = quadrant & 1;
  const double ss = swap ? cp : sp;
  const double cc = swap ? sp : cp;
  s = (quadrant & 2) ? -ss : ss;
  c = ((quadrant + 1) & 2) ? -cc : cc;
}

}  // namespace chaoslab::kernels
