#include "chaoslab/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "chaoslab/error.hpp"

namespace chaoslab {

namespace {

constexpr int kMinInteriorSamples = 16;

double forcing(const HierarchyParams& p, int k, double t) {
  if (p.M3 == 0.0) return 0.0;
  return p.M3 * std::exp(p.M3 * t) * std::pow(static_cast<double>(k), p.beta) / (static_cast<double>(p.N) * p.N);
}

void check_monotone(const std::vector<double>& x, double t) {
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k + 1 < x.size(); ++k)
    if (x[k + 1] < x[k] - 1e-12 * scale)
      fail(ErrorKind::infeasible, "integrated curves lost monotonicity in k at k=" + std::to_string(k + 1) +
                                      ", t=" + std::to_string(t));
}

}  // namespace

void HierarchyParams::validate() const {
  require(N >= 1, ErrorKind::invalid_input, "N must be positive");
  require(beta >= 2.0, ErrorKind::invalid_input, "beta must be >= 2");
  require(c2 >= 0.0 && c1 > c2, ErrorKind::invalid_input, "need c1 > c2 >= 0");
  require(C0 >= 0.0 && M1 >= 0.0 && M2 >= 0.0 && M3 >= 0.0, ErrorKind::invalid_input,
          "C0, M1, M2, M3 must be nonnegative");
  require(T > 0.0 && std::isfinite(T), ErrorKind::invalid_input, "T must be positive");
}

double HierarchyParams::rhs(int k, double t, const std::vector<double>& x, const std::vector<double>& y) const {
  const auto i = static_cast<std::size_t>(k - 1);
  double r = -c1 * y[i] + M1 * x[i] + forcing(*this, k, t);
  if (k < N) r += c2 * y[i + 1] + M2 * k * (x[i + 1] - x[i]);
  return r;
}

YSupplier YSupplier::proportional(double lambda) {
  require(lambda >= 0.0, ErrorKind::invalid_input, "proportional rule needs lambda >= 0");
  YSupplier s;
  s.kind = Kind::proportional;
  s.lambda = lambda;
  return s;
}

YSupplier YSupplier::table(std::vector<double> times, std::vector<std::vector<double>> y) {
  require(times.size() >= 2, ErrorKind::invalid_input, "table needs at least two times");
  require(std::is_sorted(times.begin(), times.end()) &&
              std::adjacent_find(times.begin(), times.end()) == times.end(),
          ErrorKind::invalid_input, "table times must be strictly increasing");
  for (const auto& row : y) {
    require(row.size() == times.size(), ErrorKind::shape, "table rows must match the time grid");
    for (double v : row) require(v >= 0.0 && std::isfinite(v), ErrorKind::invalid_input, "table y must be >= 0");
  }
  YSupplier s;
  s.kind = Kind::table;
  s.times = std::move(times);
  s.y = std::move(y);
  return s;
}

std::vector<double> YSupplier::operator()(double t, const std::vector<double>& x) const {
  std::vector<double> out(x.size(), 0.0);
  switch (kind) {
    case Kind::zero:
      break;
    case Kind::proportional:
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = lambda * static_cast<double>(k + 1) * x[k];
      break;
    case Kind::table: {
      auto it = std::upper_bound(times.begin(), times.end(), t);
      std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - times.begin()), 1, times.size() - 1);
      const double w = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = (1 - w) * y[k][hi - 1] + w * y[k][hi];
      break;
    }
  }
  return out;
}

HierarchyTrajectory integrate_closed_hierarchy(const HierarchyParams& params, const YSupplier& supplier, int steps,
                                               double budget) {
  params.validate();
  require(steps >= 1, ErrorKind::invalid_input, "need at least one step");
  const double work = static_cast<double>(params.N) * steps;
  require(work <= budget, ErrorKind::resource,
          "N * steps = " + std::to_string(work) + " exceeds the budget " + std::to_string(budget));
  if (supplier.kind == YSupplier::Kind::table) {
    require(supplier.y.size() == static_cast<std::size_t>(params.N), ErrorKind::shape, "table needs N rows");
    require(supplier.times.front() <= 0.0 && supplier.times.back() >= params.T * (1 - 1e-12), ErrorKind::invalid_input,
            "table must cover [0, T]");
  }

  const auto n = static_cast<std::size_t>(params.N);
  const double dt = params.T / steps;
  auto deriv = [&](double t, const std::vector<double>& x) {
    const auto y = supplier(t, x);
    std::vector<double> d(n);
    for (int k = 1; k <= params.N; ++k) d[static_cast<std::size_t>(k - 1)] = params.rhs(k, t, x, y);
    return d;
  };

  HierarchyTrajectory traj;
  traj.N = params.N;
  traj.times.resize(static_cast<std::size_t>(steps) + 1);
  traj.x.assign(n, std::vector<double>(traj.times.size()));
  traj.y.assign(n, std::vector<double>(traj.times.size()));

  std::vector<double> x(n), tmp(n);
  for (std::size_t k = 0; k < n; ++k)
    x[k] = params.C0 * static_cast<double>((k + 1) * (k + 1)) / (static_cast<double>(n) * static_cast<double>(n));
  auto record = [&](int i, double t) {
    traj.times[static_cast<std::size_t>(i)] = t;
    const auto y = supplier(t, x);
    for (std::size_t k = 0; k < n; ++k) {
      traj.x[k][static_cast<std::size_t>(i)] = x[k];
      traj.y[k][static_cast<std::size_t>(i)] = y[k];
    }
  };
  record(0, 0.0);
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    const auto k1 = deriv(t, x);
    for (std::size_t k = 0; k < n; ++k) tmp[k] = x[k] + 0.5 * dt * k1[k];
    const auto k2 = deriv(t + 0.5 * dt, tmp);
    for (std::size_t k = 0; k < n; ++k) tmp[k] = x[k] + 0.5 * dt * k2[k];
    const auto k3 = deriv(t + 0.5 * dt, tmp);
    for (std::size_t k = 0; k < n; ++k) tmp[k] = x[k] + dt * k3[k];
    const auto k4 = deriv(t + dt, tmp);
    for (std::size_t k = 0; k < n; ++k) x[k] += dt / 6.0 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]);
    const double t1 = s + 1 == steps ? params.T : (s + 1) * dt;
    check_monotone(x, t1);
    record(s + 1, t1);
  }
  return traj;
}

double HypothesisReport::worst() const { return std::min({worst_initial, worst_monotonicity, worst_differential}); }

bool HypothesisReport::holds(double tol) const {
  return worst_initial >= -tol && worst_monotonicity >= -tol && worst_differential >= -(tol + truncation);
}

std::string HypothesisReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "k,t,x,y,margin\n";
  for (const auto& r : rows) os << r.k << ',' << r.t << ',' << r.x << ',' << r.y << ',' << r.margin << '\n';
  return os.str();
}

HypothesisReport verify_hypotheses(const HierarchyTrajectory& traj, const HierarchyParams& params) {
  return verify_hypotheses(traj, {HierarchyWindow{traj.times.empty() ? 0.0 : traj.times.front(),
                                                  traj.times.empty() ? 0.0 : traj.times.back(), params}});
}

HypothesisReport verify_hypotheses(const HierarchyTrajectory& traj, const std::vector<HierarchyWindow>& windows) {
  const std::size_t n = traj.size();
  require(n >= kMinInteriorSamples + 2, ErrorKind::invalid_input, "need at least 16 interior samples");
  require(traj.x.size() == static_cast<std::size_t>(traj.N) && traj.y.size() == traj.x.size(), ErrorKind::shape,
          "trajectory needs N curves of x and y");
  require(!windows.empty(), ErrorKind::invalid_input, "need at least one parameter window");
  for (const auto& w : windows) {
    w.params.validate();
    require(w.params.N == traj.N, ErrorKind::shape, "window parameters must use the trajectory's N");
  }
  auto params_at = [&](double t) -> const HierarchyParams& {
    for (const auto& w : windows)
      if (t >= w.t_begin && t <= w.t_end) return w.params;
    fail(ErrorKind::invalid_input, "time " + std::to_string(t) + " is outside every parameter window");
  };

  const auto N = static_cast<std::size_t>(traj.N);
  HypothesisReport rep;
  rep.worst_initial = std::numeric_limits<double>::infinity();
  rep.worst_monotonicity = std::numeric_limits<double>::infinity();
  rep.worst_differential = std::numeric_limits<double>::infinity();

  const auto& p0 = params_at(traj.times.front());
  for (std::size_t k = 0; k < N; ++k)
    rep.worst_initial =
        std::min(rep.worst_initial, p0.C0 * static_cast<double>((k + 1) * (k + 1)) / static_cast<double>(N * N) -
                                        traj.x[k][0]);

  std::vector<double> x(N), y(N);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < N; ++k) {
      x[k] = traj.x[k][i];
      y[k] = traj.y[k][i];
    }
    const double t = traj.times[i];
    for (std::size_t k = 0; k + 1 < N; ++k)
      if (x[k + 1] - x[k] < rep.worst_monotonicity) {
        rep.worst_monotonicity = x[k + 1] - x[k];
        rep.monotonicity_k = static_cast<int>(k + 1);
        rep.monotonicity_t = t;
      }
    const bool interior = i > 0 && i + 1 < n;
    const HierarchyParams* p = interior ? &params_at(t) : nullptr;
    for (std::size_t k = 0; k < N; ++k) {
      MarginRow row{static_cast<int>(k + 1), t, x[k], y[k], std::numeric_limits<double>::quiet_NaN()};
      if (interior) {
        const double dxdt = (traj.x[k][i + 1] - traj.x[k][i - 1]) / (traj.times[i + 1] - traj.times[i - 1]);
        row.margin = p->rhs(row.k, t, x, y) - dxdt;
        const std::size_t c = std::clamp<std::size_t>(i, 2, n - 3);
        const double h = 0.5 * (traj.times[c + 1] - traj.times[c - 1]);
        const auto& xs = traj.x[k];
        const double third = (xs[c + 2] - 2 * xs[c + 1] + 2 * xs[c - 1] - xs[c - 2]) / (2 * h * h * h);
        // Factor 2: the clamped stencil at the ends is only first-order accurate.
        rep.truncation = std::max(rep.truncation, 2.0 * h * h * std::abs(third) / 6.0);
        if (row.margin < rep.worst_differential) {
          rep.worst_differential = row.margin;
          rep.differential_k = row.k;
          rep.differential_t = t;
        }
      }
      rep.rows.push_back(row);
    }
  }
  if (N == 1) rep.worst_monotonicity = 0.0;
  if (!std::isfinite(rep.truncation)) rep.truncation = std::numeric_limits<double>::infinity();
  return rep;
}

double fit_envelope(const HierarchyTrajectory& traj, double beta) { return fit_envelope(std::vector{traj}, beta); }

double fit_envelope(const std::vector<HierarchyTrajectory>& trajs, double beta) {
  // Constraint per sample: M e^{M t} >= x N^2 / k^beta =: need.
  struct Sample {
    double t, need;
  };
  std::vector<Sample> samples;
  for (const auto& tr : trajs)
    for (std::size_t k = 0; k < tr.x.size(); ++k)
      for (std::size_t i = 0; i < tr.size(); ++i) {
        const double need = tr.x[k][i] * static_cast<double>(tr.N) * tr.N / std::pow(static_cast<double>(k + 1), beta);
        if (need > 0.0) samples.push_back({tr.times[i], need});
      }
  if (samples.empty()) return 0.0;
  auto feasible = [&](double M) {
    for (const auto& s : samples)
      if (M * std::exp(M * s.t) < s.need) return false;
    return true;
  };
  double lo = 0.0, hi = 1.0;
  while (!feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    require(std::isfinite(hi), ErrorKind::infeasible, "no finite envelope");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::string trajectory_csv(const HierarchyTrajectory& traj) {
  std::ostringstream os;
  os.precision(17);
  os << "k,t,x,y\n";
  for (std::size_t k = 0; k < traj.x.size(); ++k)
    for (std::size_t i = 0; i < traj.size(); ++i)
      os << k + 1 << ',' << traj.times[i] << ',' << traj.x[k][i] << ',' << traj.y[k][i] << '\n';
  return os.str();
}

}  // namespace chaoslab

namespace chaoslab {

OracleHierarchy hierarchy_from_reports(const std::vector<EntropyProductionReport>& reports, double beta) {
  require(!reports.empty(), ErrorKind::invalid_input, "need one report per k");
  const int N = reports.front().N;
  require(static_cast<int>(reports.size()) == N, ErrorKind::shape, "need reports for k = 1..N");
  const std::size_t n = reports.front().rows.size();
  for (int k = 1; k <= N; ++k) {
    const auto& r = reports[static_cast<std::size_t>(k - 1)];
    require(r.N == N && r.k == k && r.rows.size() == n, ErrorKind::shape, "reports must cover k = 1..N on one grid");
    for (std::size_t i = 0; i < n; ++i)
      require(r.rows[i].time == reports.front().rows[i].time, ErrorKind::shape, "reports must share snapshot times");
  }
  const auto& ref = reports.front();
  const auto& eps = ref.epsilons;

  OracleHierarchy out;
  auto& tr = out.trajectory;
  tr.N = N;
  tr.times.resize(n);
  tr.x.assign(static_cast<std::size_t>(N), std::vector<double>(n));
  tr.y = tr.x;
  out.remainder = tr.x;
  for (std::size_t k = 0; k < static_cast<std::size_t>(N); ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = reports[k].rows[i];
      tr.times[i] = row.time;
      tr.x[k][i] = row.H_k;
      tr.y[k][i] = row.fisher_k;
      out.remainder[k][i] = std::max(0.0, row.bound_I + row.bound_J - (eps.eps1 + eps.eps2) * row.fisher_k);
      out.C = std::max(out.C, row.C_t);
    }

  auto& p = out.params;
  p.N = N;
  p.beta = beta;
  p.c1 = ref.lambda1 - eps.eps1 - eps.eps2 - eps.eps3 - ref.eta / (4.0 * eps.eps);
  p.c2 = ref.eta * eps.eps;
  p.M1 = 0.0;
  p.M2 = (ref.sup_b_hat * ref.sup_b_hat + out.C * out.C * ref.sup_a2 * ref.sup_a2) / eps.eps3;
  for (std::size_t k = 0; k < static_cast<std::size_t>(N); ++k)
    p.C0 = std::max(p.C0, tr.x[k][0] * N * N / static_cast<double>((k + 1) * (k + 1)));
  HierarchyTrajectory rem{N, tr.times, out.remainder, out.remainder};
  p.M3 = fit_envelope(rem, beta);
  p.T = tr.times.back();
  return out;
}

}  // namespace chaoslab
