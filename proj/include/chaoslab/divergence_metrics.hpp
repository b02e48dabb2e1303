#pragma once

// Relative entropy, chi^2, total variation and Fisher information between
// gridded densities, and histogram estimates of the relative entropy of
// Monte Carlo k-marginals against the product mean-field law.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chaoslab/mean_field.hpp"
#include "chaoslab/particle_system.hpp"
#include "chaoslab/torus_grid.hpp"

namespace chaoslab {

enum class EstimatorKind { quadrature, histogram_plugin };

struct DivergenceReport {
  EstimatorKind kind = EstimatorKind::quadrature;
  double H = 0.0;
  double chi2 = 0.0;
  double tv = 0.0;
  std::optional<double> fisher;
  int resolution = 0;
  int axes = 1;

  // Histogram estimates only.
  double alpha = 0.0;        // pseudo-counts per cell
  int R = 0;                 // replicas
  std::int64_t samples = 0;  // k-tuples histogrammed
  int bootstrap = 0;         // resamples
  double se = 0.0;           // bootstrap standard error of H
  double H_debiased = 0.0;   // 2 H - mean of the bootstrap replicates
  double bias_bound = 0.0;   // null-law plug-in mean + 4 sd, ((C-1) + 4 sqrt(2(C-1))) / (2 n)
  double H_half = 0.0;       // same estimate at resolution G/2
  double bias_proxy = 0.0;   // H - H_half
  std::vector<std::string> warnings;

  std::string to_json() const;
};

// H = h^m sum p log(p/q) (0 log 0 = 0), chi2 = h^m sum (p-q)^2/q, tv = h^m sum |p-q| / 2.
// Throws absolute_continuity when q vanishes where p does not.
DivergenceReport divergence_grid(const GriddedDensity& p, const GriddedDensity& q);

// h^m sum p |grad(log p - log q)|^2 with central differences.
double fisher_grid(const GriddedDensity& p, const GriddedDensity& q);

// Which k-tuples of a replica enter the histogram. all_disjoint uses the
// floor(N/k) tuples (1..k), (k+1..2k), ...: each has the exact k-marginal law.
enum class TupleMode { first, all_disjoint };

struct HistogramOptions {
  double alpha = 0.5;
  TupleMode tuples = TupleMode::all_disjoint;
  int bootstrap = 200;
  std::uint64_t seed = 0x5eedb007ull;
};

// Smoothed, normalized histogram of k-tuples at the given snapshot (d = 1).
GriddedDensity mc_marginal_histogram(const EnsembleRun& run, double time, int k, int resolution,
                                     const HistogramOptions& opt = {});

// Plug-in relative entropy of the smoothed histogram against the k-fold
// product of the mean-field law (coarsened to the histogram grid), with a
// replica bootstrap, a bias-corrected value and a G/2 refinement arm.
DivergenceReport mc_entropy_estimate(const EnsembleRun& run, double time, int k, const MeanFieldSolution& mf,
                                     int resolution, const HistogramOptions& opt = {});

}  // namespace chaoslab
