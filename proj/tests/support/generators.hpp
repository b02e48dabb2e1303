#pragma once

// Hand-rolled generators for property tests.

#include <cmath>
#include <random>
#include <vector>

#include "chaoslab/torus_grid.hpp"

namespace gen {

inline std::mt19937_64& engine() {
  static std::mt19937_64 e(20261015);
  return e;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine()); }

inline int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine()); }

// Strictly positive random density: exp of a few random Fourier modes on each axis.
inline chaoslab::GriddedDensity smooth_density(int axes, int resolution, double amplitude = 1.0) {
  const std::size_t n = chaoslab::checked_cell_count(axes, resolution);
  std::vector<double> v(n, 0.0);
  for (int a = 0; a < axes; ++a) {
    const double c = uniform(-amplitude, amplitude), s = uniform(-amplitude, amplitude);
    const double c2 = uniform(-amplitude, amplitude) / 2;
    std::size_t stride = 1;
    for (int b = a + 1; b < axes; ++b) stride *= static_cast<std::size_t>(resolution);
    for (std::size_t cell = 0; cell < n; ++cell) {
      const double x = ((cell / stride) % static_cast<std::size_t>(resolution) + 0.5) / resolution;
      v[cell] += c * std::cos(2 * M_PI * x) + s * std::sin(2 * M_PI * x) + c2 * std::cos(4 * M_PI * x);
    }
  }
  for (double& x : v) x = std::exp(x);
  return chaoslab::GriddedDensity::normalized(axes, resolution, std::move(v));
}

// Rough density with independent cell weights in [lo, 1].
inline chaoslab::GriddedDensity rough_density(int axes, int resolution, double lo = 0.05) {
  std::vector<double> v(chaoslab::checked_cell_count(axes, resolution));
  for (double& x : v) x = uniform(lo, 1.0);
  return chaoslab::GriddedDensity::normalized(axes, resolution, std::move(v));
}

// Exchangeable, correlated joint density on up to 3 axes: a random one-body
// profile on every axis plus a random pair coupling in v_i - v_j.
inline chaoslab::GriddedDensity exchangeable_density(int axes, int resolution, double amplitude = 0.5) {
  const std::size_t n = chaoslab::checked_cell_count(axes, resolution);
  const double c = uniform(-amplitude, amplitude), s = uniform(-amplitude, amplitude);
  const double pc = uniform(-amplitude, amplitude), ps = uniform(-amplitude, amplitude) / 2;
  std::vector<double> v(n);
  for (std::size_t cell = 0; cell < n; ++cell) {
    double x[3];
    std::size_t rest = cell;
    for (int a = axes - 1; a >= 0; --a) {
      x[a] = (static_cast<double>(rest % static_cast<std::size_t>(resolution)) + 0.5) / resolution;
      rest /= static_cast<std::size_t>(resolution);
    }
    double e = 0.0;
    for (int i = 0; i < axes; ++i) {
      e += c * std::cos(2 * M_PI * x[i]) + s * std::sin(2 * M_PI * x[i]);
      for (int j = i + 1; j < axes; ++j)
        e += pc * std::cos(2 * M_PI * (x[i] - x[j])) + ps * std::cos(4 * M_PI * (x[i] - x[j]));
    }
    v[cell] = std::exp(e);
  }
  return chaoslab::GriddedDensity::normalized(axes, resolution, std::move(v));
}

}  // namespace gen
