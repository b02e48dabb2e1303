#pragma once

// Coupled differential inequalities for a family x^1..x^N indexed by the
// marginal order k:
//
//   dx^k/dt <= -c1 y^k + c2 y^{k+1} [k<N] + M1 x^k + M2 k (x^{k+1} - x^k) [k<N]
//              + M3 e^{M3 t} k^beta / N^2,      x_0^k <= C0 k^2 / N^2,
//
// with x^{k+1} >= x^k. The equality dynamics are integrated with RK4 and
// sampled curves can be checked against the hypotheses. fit_envelope finds
// the least M with x_t^k <= M e^{M t} k^beta / N^2.

#include <cstdint>
#include <string>
#include <vector>

#include "chaoslab/bbgky_oracle.hpp"

namespace chaoslab {

struct HierarchyParams {
  int N = 2;
  double beta = 2.0;
  double c1 = 1.0, c2 = 0.0;
  double C0 = 0.0, M1 = 0.0, M2 = 0.0, M3 = 0.0;
  double T = 1.0;

  // Throws invalid_input unless N >= 1, beta >= 2, c1 > c2 >= 0, C0, M_i >= 0, T > 0.
  void validate() const;
  // Right-hand side of the inequality for level k (1-based).
  double rhs(int k, double t, const std::vector<double>& x, const std::vector<double>& y) const;
};

// Rule for the dissipation curves y^k.
struct YSupplier {
  enum class Kind { zero, proportional, table };
  Kind kind = Kind::zero;
  double lambda = 0.0;  // proportional: y^k = lambda k x^k
  // table: y[k-1][i] at times[i], linear in between; must cover [0, T].
  std::vector<double> times;
  std::vector<std::vector<double>> y;

  static YSupplier zero() { return {}; }
  static YSupplier proportional(double lambda);
  static YSupplier table(std::vector<double> times, std::vector<std::vector<double>> y);

  std::vector<double> operator()(double t, const std::vector<double>& x) const;
};

struct HierarchyTrajectory {
  int N = 0;
  std::vector<double> times;
  std::vector<std::vector<double>> x;  // x[k-1][i]
  std::vector<std::vector<double>> y;  // y[k-1][i]

  std::size_t size() const { return times.size(); }
};

inline constexpr int kDefaultHierarchySteps = 4096;
inline constexpr double kDefaultHierarchyBudget = 1e9;

// Classical RK4 with equality in the inequality, x_0^k = C0 k^2/N^2.
// Throws resource when N * steps exceeds the budget, invalid_input on a bad
// table, and infeasible if the integrated curves lose monotonicity in k.
HierarchyTrajectory integrate_closed_hierarchy(const HierarchyParams& params, const YSupplier& supplier,
                                               int steps = kDefaultHierarchySteps,
                                               double budget = kDefaultHierarchyBudget);

// Constant parameters on [t_begin, t_end]; windows let C_t vary in time.
struct HierarchyWindow {
  double t_begin = 0.0, t_end = 0.0;
  HierarchyParams params;
};

struct MarginRow {
  int k = 0;
  double t = 0.0, x = 0.0, y = 0.0;
  double margin = 0.0;  // rhs - centered dx/dt; NaN at the end points
};

struct HypothesisReport {
  std::vector<MarginRow> rows;
  double worst_initial = 0.0;       // min_k C0 k^2/N^2 - x_0^k
  double worst_monotonicity = 0.0;  // min_{k<N, t} x^{k+1} - x^k
  int monotonicity_k = 0;           // where the minimum sits
  double monotonicity_t = 0.0;
  double worst_differential = 0.0;  // min over interior rows of margin
  int differential_k = 0;
  double differential_t = 0.0;
  // Twice the largest estimated centered-difference error dt^2 |x'''| / 6
  // (five-point third difference), allowed on top of tol for the
  // differential check.
  double truncation = 0.0;

  double worst() const;
  bool holds(double tol) const;
  std::string to_csv() const;
};

// Never throws on failed hypotheses; they show up as negative margins.
// Needs at least 16 interior samples.
HypothesisReport verify_hypotheses(const HierarchyTrajectory& traj, const HierarchyParams& params);
HypothesisReport verify_hypotheses(const HierarchyTrajectory& traj, const std::vector<HierarchyWindow>& windows);

// Least M >= 0 with x_t^k <= M e^{M t} k^beta / N^2 at every sample.
double fit_envelope(const HierarchyTrajectory& traj, double beta);
// Same, uniformly over several trajectories (typically several N).
double fit_envelope(const std::vector<HierarchyTrajectory>& trajs, double beta);

std::string trajectory_csv(const HierarchyTrajectory& traj);

// Measured curves x^k = H^k, y^k = I^k from entropy-production reports for
// k = 1..N (same snapshots), with constants read off the term bounds:
// c1 = lambda1 - eps1 - eps2 - eps3 - eta/(4 eps), c2 = eta eps, M1 = 0,
// M2 = (sup|b_hat|^2 + C^2 sup|a2|^2)/eps3 with C the largest C_t, C0 the
// least value matching x_0, and M3 the envelope of the I and J remainders.
struct OracleHierarchy {
  HierarchyTrajectory trajectory;
  HierarchyParams params;
  double C = 0.0;
  std::vector<std::vector<double>> remainder;  // remainder[k-1][i]
};
OracleHierarchy hierarchy_from_reports(const std::vector<EntropyProductionReport>& reports, double beta = 2.0);

}  // namespace chaoslab
