#pragma once

// Vectorized reductions. Without -ffast-math the compiler keeps one serial
// accumulator; `omp simd` permits lane-wise partial sums. The order depends
// only on the build's vector width, so results are reproducible run to run.

#include <cstddef>

namespace chaoslab::kernels {

inline double lane_sum(const double* a, std::size_t n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

inline double lane_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double lane_max(const double* a, std::size_t n, double init) {
  double m = init;
#pragma omp simd reduction(max : m)
  for (std::size_t i = 0; i < n; ++i) m = a[i] > m ? a[i] : m;
  return m;
}

inline double lane_min(const double* a, std::size_t n, double init) {
  double m = init;
#pragma omp simd reduction(min : m)
  for (std::size_t i = 0; i < n; ++i) m = a[i] < m ? a[i] : m;
  return m;
}

// Extremes of a[i + 2] / a[i] for i < n.
inline void ratio_extremes(const double* a, std::size_t n, double& lo, double& hi) {
  double l = lo, h = hi;
#pragma omp simd reduction(min : l) reduction(max : h)
  for (std::size_t i = 0; i < n; ++i) {
    const double q = a[i + 2] / a[i];
    l = q < l ? q : l;
    h = q > h ? q : h;
  }
  lo = l;
  hi = h;
}

}  // namespace chaoslab::kernels
