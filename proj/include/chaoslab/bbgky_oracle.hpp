#pragma once

// Desk-scale ground truth: the full N-particle Fokker-Planck equation on
// (T^1)^N for small N, its exact marginals, and every term of the relative
// entropy production between the k-marginal and the k-fold mean-field law.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chaoslab/coefficients.hpp"
#include "chaoslab/mean_field.hpp"
#include "chaoslab/particle_system.hpp"
#include "chaoslab/torus_grid.hpp"

namespace chaoslab {

inline constexpr int kMaxJointParticles = 3;
inline constexpr double kConditionalFloor = 1e-14;
inline constexpr double kExcludedMassLimit = 1e-8;

struct JointSolution {
  int N = 2;
  int resolution = 0;
  std::vector<double> times;
  std::vector<GriddedDensity> densities;  // N axes each
  double dt_pde = 0.0;
  std::int64_t steps = 0;
  bool include_self = true;

  std::size_t index(double time) const;
  const GriddedDensity& at(double time) const { return densities[index(time)]; }
};

// Joint density of N particles drawn from `law` (product or exchangeable mixture).
GriddedDensity initial_joint_density(const InitialLaw& law, int N, int resolution);

// Explicit finite-volume march of
//   d_t mu = sum_i d_i [ D_i d_i mu - U_i mu ],
//   D_i = a1(v_i) + (1/N) sum_j a2(v_i - v_j),
//   U_i = (1/N) [ b(0) + sum_{j != i} b_hat(v_i - v_j) ] - a1'(v_i),
// one-dimensional sweeps per axis averaged over all N! axis orders, so product
// and exchangeable structure are preserved by the scheme. Faces and step sizes
// match solve_mean_field on the same grid. N in {1, 2, 3}.
JointSolution solve_joint_fp(int N, const CoefficientSet& cs, const GriddedDensity& initial, double T,
                             std::vector<double> times, double dt_max = 0.0, bool include_self = true);

// max |rho - rho o sigma| over transpositions sigma of two axes.
double max_axis_asymmetry(const GriddedDensity& rho);

struct Epsilons {
  double eps = 0.5;
  double eps1 = 0.0, eps2 = 0.0, eps3 = 0.0;
  double c1 = 0.0, c2 = 0.0;
};

// eps1 = eps2 = eps3 = 0.01 lambda1 and eps = 1/2 (the minimizer of
// eta eps + eta / (4 eps)); when that leaves c1 <= c2 the three small
// epsilons shrink to (lambda1 - eta) / 6. Throws infeasible when eta >= lambda1.
Epsilons choose_epsilons(double lambda1, double eta);

struct EntropyProductionRow {
  double time = 0.0;
  double H_k = 0.0, H_k1 = 0.0;
  double fisher_k = 0.0, fisher_k1 = 0.0;
  double term_I = 0.0, term_J = 0.0, K2 = 0.0, K3 = 0.0, K4 = 0.0;
  // Ellipticity terms: the k-particle and the (N-k)/N parts of -sum D |grad log ratio|^2.
  double dissipation_k = 0.0, dissipation_rest = 0.0;
  // term_I + term_J + K2 + K3 + K4 - dissipation_k - dissipation_rest (= dH/dt).
  double identity = 0.0;
  // Explicit bounds for each term (epsilon splits included).
  double bound_I = 0.0, bound_J = 0.0, bound_K2 = 0.0, bound_K3 = 0.0, bound_K4 = 0.0;
  double lhs = 0.0, rhs = 0.0, margin = 0.0;  // lhs, margin NaN at the end points
  double chi2_k = 0.0, energy_k = 0.0;
  double C_t = 0.0;
  double towering_residual = 0.0;  // |int mu^k H(cond | mu) - (H_k1 - H_k)|
  double pinsker_worst = 0.0;      // max over base points of lhs - rhs of the Pinsker step
  // Reference (mu^{(x)k}) mass of cells whose k-marginal is below the floor;
  // those cells are left out of every quadrature. Above 1e-8 is an error.
  double excluded_mass = 0.0;
};

struct EntropyProductionReport {
  int N = 0;
  int k = 0;
  double lambda1 = 0.0, eta = 0.0;
  double sup_b_hat = 0.0, sup_a2 = 0.0;
  Epsilons epsilons;
  std::vector<EntropyProductionRow> rows;

  double min_margin() const;
  std::string to_csv() const;
};

// Quadrature of every entropy-production term at the joint snapshot times. The
// mean-field solution must have the same resolution and include every joint
// snapshot time. 1 <= k <= N; at k = N the coupling terms vanish.
EntropyProductionReport evaluate_entropy_production(const JointSolution& joint, const MeanFieldSolution& mf,
                                                    const CoefficientSet& cs, int k, const Epsilons& eps);

// d/dv_i log mu^{(x)k} at every cell of the k-axis grid, built from the 1D
// central difference of log mu; component i depends on v_i only.
GradientField log_product_gradient(const GriddedDensity& mu, int k);

// int mu^{(x)3} (a2(v1 - v2) - a2*mu(v1)) (a2(v1 - v3) - a2*mu(v1)) by direct
// triple-sum quadrature.
double cancellation_integral(const GriddedDensity& mu, const CoefficientSet& cs);

void write_report_csv(const EntropyProductionReport& report, const std::filesystem::path& path);

}  // namespace chaoslab
