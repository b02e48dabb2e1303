#include "chaoslab/mean_field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "chaoslab/kernels/pairwise_series.hpp"
#include "chaoslab/kernels/reduce.hpp"

namespace chaoslab {

namespace {

struct ScalarSeries {
  double constant = 0.0;
  std::vector<int> wave;
  std::vector<double> cos_coef, sin_coef;
};

ScalarSeries scalar_series(const TrigField& f) {
  require(f.dim() == 1 && f.rows() * f.cols() == 1, ErrorKind::shape, "expected a scalar field on T^1");
  ScalarSeries s;
  s.constant = f.constant()[0];
  for (const auto& m : f.modes()) {
    s.wave.push_back(m.wave[0]);
    s.cos_coef.push_back(m.cos_coef[0]);
    s.sin_coef.push_back(m.sin_coef[0]);
  }
  return s;
}

// Face coefficients for a fixed (cs, G); caches everything that does not
// depend on the density.
class FaceOperator {
 public:
  FaceOperator(const CoefficientSet& cs, int G) : cs_(cs), G_(G), h_(1.0 / G) {
    require(cs.dim() == 1, ErrorKind::shape, "the mean-field solver is one-dimensional");
    const auto n = static_cast<std::size_t>(G);
    a1_face_.resize(n);
    div_a1_face_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = wrap((static_cast<double>(i) + 1.0) * h_);
      a1_face_[i] = cs.a1().scalar(x);
      div_a1_face_[i] = cs.div_a1().scalar(x);
    }
    fast_ = cs.a2().has_series() && cs.b_hat().has_series();
    if (!fast_) return;
    a2_ = scalar_series(cs.a2().series());
    b_hat_ = scalar_series(cs.b_hat().series());
    for (const auto* s : {&a2_, &b_hat_})
      for (int k : s->wave)
        if (std::find(waves_.begin(), waves_.end(), k) == waves_.end()) waves_.push_back(k);
    const std::size_t nw = waves_.size();
    cell_cos_.resize(nw * n);
    cell_sin_.resize(nw * n);
    face_cos_.resize(nw * n);
    face_sin_.resize(nw * n);
    for (std::size_t w = 0; w < nw; ++w) {
      for (std::size_t i = 0; i < n; ++i) {
        const double k = waves_[w];
        kernels::sincos_2pi(k * (static_cast<double>(i) + 0.5) * h_, cell_sin_[w * n + i], cell_cos_[w * n + i]);
        kernels::sincos_2pi(k * (static_cast<double>(i) + 1.0) * h_, face_sin_[w * n + i], face_cos_[w * n + i]);
      }
    }
  }

  bool fast() const noexcept { return fast_; }

  void evaluate(std::span<const double> rho, FaceCoefficients& out) const {
    if (fast_) {
      evaluate_fast(rho, out);
    } else {
      evaluate_direct(rho, out);
    }
  }

  void evaluate_direct(std::span<const double> rho, FaceCoefficients& out) const {
    const auto density = GriddedDensity::normalized(1, G_, std::vector<double>(rho.begin(), rho.end()));
    // normalized() rescales; undo so the convolution sees the raw mass.
    double mass = 0.0;
    for (double v : rho) mass += v;
    mass *= h_;
    const auto a2 = circular_convolve_kernel([&](double x) { return cs_.a2().scalar(x); }, density, 1.0);
    const auto bh = circular_convolve_kernel([&](double x) { return cs_.b_hat().scalar(x); }, density, 1.0);
    const auto n = static_cast<std::size_t>(G_);
    out.D.resize(n);
    out.U.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.D[i] = a1_face_[i] + mass * a2.values[i];
      out.U[i] = mass * bh.values[i] - div_a1_face_[i];
    }
  }

 private:
  void evaluate_fast(std::span<const double> rho, FaceCoefficients& out) const {
    const auto n = static_cast<std::size_t>(G_);
    const std::size_t nw = waves_.size();
    const double mass = h_ * kernels::lane_sum(rho.data(), n);
    out.D.resize(n);
    out.U.resize(n);
    double* __restrict D = out.D.data();
    double* __restrict U = out.U.data();
    const double* __restrict a1f = a1_face_.data();
    const double* __restrict da1f = div_a1_face_.data();
    const double d0 = a2_.constant * mass, u0 = b_hat_.constant * mass;
    for (std::size_t i = 0; i < n; ++i) {
      D[i] = a1f[i] + d0;
      U[i] = u0 - da1f[i];
    }
    for (std::size_t w = 0; w < nw; ++w) {
      const double* cc = cell_cos_.data() + w * n;
      const double* cs = cell_sin_.data() + w * n;
      const double C = h_ * kernels::lane_dot(rho.data(), cc, n);
      const double S = h_ * kernels::lane_dot(rho.data(), cs, n);
      // f(x - y) = A cos(2 pi k (x - y)) + B sin(2 pi k (x - y)) integrated against rho(y).
      double dA = 0, dB = 0, uA = 0, uB = 0;
      for (std::size_t m = 0; m < a2_.wave.size(); ++m) {
        if (a2_.wave[m] != waves_[w]) continue;
        dA += a2_.cos_coef[m];
        dB += a2_.sin_coef[m];
      }
      for (std::size_t m = 0; m < b_hat_.wave.size(); ++m) {
        if (b_hat_.wave[m] != waves_[w]) continue;
        uA += b_hat_.cos_coef[m];
        uB += b_hat_.sin_coef[m];
      }
      const double* __restrict fc = face_cos_.data() + w * n;
      const double* __restrict fs = face_sin_.data() + w * n;
      for (std::size_t i = 0; i < n; ++i) {
        const double P = fc[i] * C + fs[i] * S;
        const double Q = fs[i] * C - fc[i] * S;
        D[i] += dA * P + dB * Q;
        U[i] += uA * P + uB * Q;
      }
    }
  }

  const CoefficientSet& cs_;
  int G_;
  double h_;
  bool fast_ = false;
  std::vector<double> a1_face_, div_a1_face_;
  ScalarSeries a2_, b_hat_;
  std::vector<int> waves_;
  std::vector<double> cell_cos_, cell_sin_, face_cos_, face_sin_;
};

// rho <- rho + dt/h (F_i - F_{i-1}); returns the new minimum.
double apply_step(std::vector<double>& rho, const FaceCoefficients& fc, double dt, std::vector<double>& flux) {
  const std::size_t n = rho.size();
  const double h = 1.0 / static_cast<double>(n);
  flux.resize(n);
  const double inv_h = 1.0 / h;
  double* __restrict F = flux.data();
  double* __restrict p = rho.data();
  const double* __restrict D = fc.D.data();
  const double* __restrict U = fc.U.data();
  for (std::size_t i = 0; i + 1 < n; ++i) F[i] = D[i] * (p[i + 1] - p[i]) * inv_h - U[i] * 0.5 * (p[i] + p[i + 1]);
  F[n - 1] = D[n - 1] * (p[0] - p[n - 1]) * inv_h - U[n - 1] * 0.5 * (p[n - 1] + p[0]);
  const double r = dt / h;
  p[0] += r * (F[0] - F[n - 1]);
  for (std::size_t i = 1; i < n; ++i) p[i] += r * (F[i] - F[i - 1]);
  return kernels::lane_min(p, n, std::numeric_limits<double>::infinity());
}

void check_cfl(const FaceCoefficients& fc, double dt, int G) {
  const double dmax = kernels::lane_max(fc.D.data(), fc.D.size(), 0.0);
  const double h = 1.0 / G;
  const double limit = kCflSafety * h * h / (2.0 * dmax);
  if (dt > limit * (1.0 + 1e-12)) {
    fail(ErrorKind::step_size,
         "dt_pde = " + std::to_string(dt) + " exceeds the CFL bound " + std::to_string(limit));
  }
}

}  // namespace

FaceCoefficients face_coefficients(const GriddedDensity& rho, const CoefficientSet& cs) {
  require(rho.axes() == 1, ErrorKind::shape, "face coefficients need a one-axis density");
  FaceOperator op(cs, rho.resolution());
  FaceCoefficients out;
  op.evaluate(rho.values(), out);
  return out;
}

FaceCoefficients face_coefficients_direct(const GriddedDensity& rho, const CoefficientSet& cs) {
  require(rho.axes() == 1, ErrorKind::shape, "face coefficients need a one-axis density");
  FaceOperator op(cs, rho.resolution());
  FaceCoefficients out;
  op.evaluate_direct(rho.values(), out);
  return out;
}

double cfl_step(const CoefficientSet& cs, int resolution) {
  require(resolution > 0, ErrorKind::invalid_input, "resolution must be positive");
  const double h = 1.0 / resolution;
  return kCflSafety * h * h / (2.0 * cs.max_diffusion());
}

std::int64_t substep_count(double interval, double dt_max) {
  require(dt_max > 0.0, ErrorKind::step_size, "step bound must be positive");
  if (interval <= 0.0) return 0;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(interval / dt_max * (1.0 - 1e-12))));
}

GriddedDensity fp_step(const GriddedDensity& rho, const CoefficientSet& cs, double dt) {
  require(dt > 0.0, ErrorKind::step_size, "dt_pde must be positive");
  const auto fc = face_coefficients(rho, cs);
  check_cfl(fc, dt, rho.resolution());
  std::vector<double> v(rho.values().begin(), rho.values().end());
  std::vector<double> flux;
  const double lo = apply_step(v, fc, dt, flux);
  if (!(lo >= kPositivityFloor)) fail(ErrorKind::positivity_loss, "density minimum " + std::to_string(lo));
  return GriddedDensity(1, rho.resolution(), std::move(v));
}

namespace {

double grad_log_max_values(std::span<const double> rho) {
  // |log a - log b| = log max(a/b, b/a): track ratio extremes, two logs total.
  const auto n = rho.size();
  if (n < 3) return 0.0;
  const double h = 1.0 / static_cast<double>(n);
  auto ratio = [&](std::size_t i) {
    return rho[i + 1 == n ? 0 : i + 1] / rho[i == 0 ? n - 1 : i - 1];
  };
  double lo_in = 1.0, hi_in = 1.0;
  kernels::ratio_extremes(rho.data(), n - 2, lo_in, hi_in);
  const double e0 = ratio(0), e1 = ratio(n - 1);
  const double hi = std::max({hi_in, e0, e1});
  const double lo = std::min({lo_in, e0, e1});
  return std::max(std::log(hi), -std::log(lo)) / (2.0 * h);
}

}  // namespace

double grad_log_max(const GriddedDensity& rho) { return grad_log_max_values(rho.values()); }

std::size_t MeanFieldSolution::index(double time) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - time) <= 1e-9 * std::max(1.0, time)) return i;
  fail(ErrorKind::invalid_input, "mean-field solution has no snapshot at t = " + std::to_string(time));
}

std::string MeanFieldSolution::table_json() const {
  nlohmann::json j;
  j["resolution"] = resolution;
  j["dt_pde"] = dt_pde;
  j["steps"] = steps;
  j["times"] = times;
  j["grad_log_sup"] = grad_log_sup;
  return j.dump(2);
}

MeanFieldSolution solve_mean_field(const GriddedDensity& initial, const CoefficientSet& cs, double T,
                                   std::vector<double> times, double dt_max) {
  require(initial.axes() == 1, ErrorKind::shape, "mean-field initial density must have one axis");
  require(initial.min_value() > 0.0, ErrorKind::positivity_loss, "initial density must be strictly positive");
  require(T >= 0.0, ErrorKind::invalid_input, "horizon must be nonnegative");
  require(std::is_sorted(times.begin(), times.end()), ErrorKind::invalid_input, "snapshot times must be sorted");
  for (double t : times) require(t >= 0.0 && t <= T + 1e-12, ErrorKind::invalid_input, "snapshot time outside [0, T]");
  const int G = initial.resolution();
  if (dt_max <= 0.0) dt_max = cfl_step(cs, G);

  FaceOperator op(cs, G);
  MeanFieldSolution sol;
  sol.resolution = G;
  std::vector<double> rho(initial.values().begin(), initial.values().end());
  std::vector<double> flux;
  FaceCoefficients fc;
  double now = 0.0;
  double c_run = grad_log_max(initial);

  for (double target : times) {
    const std::int64_t n = substep_count(target - now, dt_max);
    if (n > 0) {
      const double dt = (target - now) / static_cast<double>(n);
      sol.dt_pde = std::max(sol.dt_pde, dt);
      for (std::int64_t s = 0; s < n; ++s) {
        op.evaluate(rho, fc);
        check_cfl(fc, dt, G);
        const double lo = apply_step(rho, fc, dt, flux);
        if (!(lo >= kPositivityFloor)) {
          fail(ErrorKind::positivity_loss, "density minimum " + std::to_string(lo) + " at t = " +
                                               std::to_string(now + static_cast<double>(s + 1) * dt));
        }
        c_run = std::max(c_run, grad_log_max_values(rho));
      }
      sol.steps += n;
      now = target;
    }
    sol.times.push_back(target);
    sol.densities.emplace_back(1, G, rho);
    sol.grad_log_sup.push_back(c_run);
  }
  return sol;
}

std::filesystem::path save_mean_field(const MeanFieldSolution& sol, const std::filesystem::path& stem) {
  nlohmann::json j = nlohmann::json::parse(sol.table_json());
  std::vector<std::string> files;
  for (std::size_t i = 0; i < sol.densities.size(); ++i) {
    auto path = stem;
    path += "_t" + std::to_string(i);
    files.push_back(save_density(sol.densities[i], path).filename().string());
  }
  j["densities"] = files;
  auto table = stem;
  table += ".json";
  std::ofstream out(table);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + table.string());
  out << j.dump(2) << '\n';
  return table;
}

}  // namespace chaoslab
