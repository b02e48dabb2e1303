#pragma once

// Nonlinear Fokker-Planck equation of the mean-field limit on T^1,
//   d_t mu = d_x [ D d_x mu - U mu ],  D = a1 + a2 * mu,  U = b_hat * mu - d_x a1,
// discretized by conservative finite volumes with explicit Euler steps.
// Densities are cell averages; faces sit at x_{i+1/2} = (i + 1) h.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chaoslab/coefficients.hpp"
#include "chaoslab/torus_grid.hpp"

namespace chaoslab {

inline constexpr double kCflSafety = 0.4;
inline constexpr double kPositivityFloor = 1e-14;

// Face diffusion and velocity for a given density; face i is between cells i and i+1.
struct FaceCoefficients {
  std::vector<double> D, U;
};

// Series coefficients use the moment identity (O(G * waves)); callables use
// tabulated O(G^2) convolution.
FaceCoefficients face_coefficients(const GriddedDensity& rho, const CoefficientSet& cs);
FaceCoefficients face_coefficients_direct(const GriddedDensity& rho, const CoefficientSet& cs);

// Largest explicit step allowed on a G grid: 0.4 h^2 / (2 max D), with D
// bounded over the whole torus so the step does not depend on the density.
double cfl_step(const CoefficientSet& cs, int resolution);
// Steps of equal length dt <= dt_max that exactly cover `interval`.
std::int64_t substep_count(double interval, double dt_max);

// One explicit step. Throws step_size when dt exceeds the CFL bound for the
// actual face diffusion, positivity_loss when a cell drops below 1e-14.
GriddedDensity fp_step(const GriddedDensity& rho, const CoefficientSet& cs, double dt);

struct MeanFieldSolution {
  std::vector<double> times;
  std::vector<GriddedDensity> densities;
  // Running max over s <= t of max_grid |d_x log mu_s|.
  std::vector<double> grad_log_sup;
  int resolution = 0;
  double dt_pde = 0.0;
  std::int64_t steps = 0;

  std::size_t index(double time) const;
  const GriddedDensity& at(double time) const { return densities[index(time)]; }
  std::string table_json() const;
};

// Marches to every requested time (sorted, within [0, T]; t = 0 allowed).
// dt_max <= 0 selects cfl_step. Each interval between consecutive times is
// split into equal substeps.
MeanFieldSolution solve_mean_field(const GriddedDensity& initial, const CoefficientSet& cs, double T,
                                   std::vector<double> times, double dt_max = 0.0);

// max over cells of |central difference of log rho| / h.
double grad_log_max(const GriddedDensity& rho);

// Writes `<stem>_t<index>` densities and `<stem>.json` with times and C(t).
std::filesystem::path save_mean_field(const MeanFieldSolution& sol, const std::filesystem::path& stem);

}  // namespace chaoslab
