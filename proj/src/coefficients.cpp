#include "chaoslab/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "chaoslab/torus_grid.hpp"

namespace chaoslab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double phase(const std::array<int, kMaxDim>& wave, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) s += wave[a] * x[a];
  return kTwoPi * s;
}

std::vector<double> identity_scaled(int d, double s) {
  std::vector<double> m(static_cast<std::size_t>(d * d), 0.0);
  for (int i = 0; i < d; ++i) m[static_cast<std::size_t>(i * d + i)] = s;
  return m;
}

SymMatrix to_matrix(std::span<const double> v, int d) {
  SymMatrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(i * d + j)];
  return m;
}

SmallVector to_vector(std::span<const double> v) {
  SmallVector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

double min_eigenvalue(const SymMatrix& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<SymMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double spectral_norm(const SymMatrix& m) {
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::SelfAdjointEigenSolver<SymMatrix> es(m, Eigen::EigenvaluesOnly);
  return std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(m.rows() - 1)));
}

double max_eigenvalue(const SymMatrix& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<SymMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(m.rows() - 1);
}

// Grid points i/G on every axis (includes the quarter points used by the
// presets' extrema), row-major.
template <class F>
void for_each_grid_point(int dim, int resolution, F&& f) {
  const std::size_t n = checked_cell_count(dim, resolution, std::size_t{1} << 26);
  std::array<double, kMaxDim> x{};
  for (std::size_t cell = 0; cell < n; ++cell) {
    std::size_t rest = cell;
    for (int a = dim - 1; a >= 0; --a) {
      x[static_cast<std::size_t>(a)] = static_cast<double>(rest % static_cast<std::size_t>(resolution)) / resolution;
      rest /= static_cast<std::size_t>(resolution);
    }
    f(std::span<const double>(x.data(), static_cast<std::size_t>(dim)));
  }
}

std::vector<SymMatrix> tabulate_matrix(const Field& f, int resolution) {
  std::vector<SymMatrix> out;
  std::vector<double> buf(static_cast<std::size_t>(f.rows() * f.cols()));
  for_each_grid_point(f.dim(), resolution, [&](std::span<const double> x) {
    f.evaluate(x, buf);
    SymMatrix m = to_matrix(buf, f.rows());
    require((m - m.transpose()).norm() <= 1e-12, ErrorKind::invalid_input,
            "coefficient matrix is not symmetric");
    out.push_back(std::move(m));
  });
  return out;
}

int sup_resolution(int dim, int requested) {
  int g = requested;
  while (dim > 1 && std::pow(static_cast<double>(g), dim) > static_cast<double>(1 << 18)) g /= 2;
  return std::max(g, 4);
}

}  // namespace

// ---------------------------------------------------------------------------
// TrigField

TrigField::TrigField(int dim, int rows, int cols)
    : dim_(dim), rows_(rows), cols_(cols), constant_(static_cast<std::size_t>(rows * cols), 0.0) {
  require(dim >= 1 && dim <= kMaxDim, ErrorKind::invalid_input, "dimension must be 1, 2 or 3");
  require(rows >= 1 && cols >= 1, ErrorKind::invalid_input, "field shape must be positive");
}

TrigField& TrigField::set_constant(std::vector<double> c) {
  require(c.size() == constant_.size(), ErrorKind::shape, "constant term has the wrong size");
  constant_ = std::move(c);
  return *this;
}

TrigField& TrigField::add_mode(std::array<int, kMaxDim> wave, std::vector<double> cos_coef,
                               std::vector<double> sin_coef) {
  const std::size_t n = constant_.size();
  if (cos_coef.empty()) cos_coef.assign(n, 0.0);
  if (sin_coef.empty()) sin_coef.assign(n, 0.0);
  require(cos_coef.size() == n && sin_coef.size() == n, ErrorKind::shape, "mode coefficients have the wrong size");
  for (int a = dim_; a < kMaxDim; ++a) {
    require(wave[static_cast<std::size_t>(a)] == 0, ErrorKind::invalid_input, "wave vector exceeds field dimension");
  }
  modes_.push_back({wave, std::move(cos_coef), std::move(sin_coef)});
  return *this;
}

void TrigField::evaluate(std::span<const double> x, std::span<double> out) const {
  std::copy(constant_.begin(), constant_.end(), out.begin());
  for (const auto& m : modes_) {
    const double th = phase(m.wave, x);
    const double c = std::cos(th);
    const double s = std::sin(th);
    for (std::size_t e = 0; e < constant_.size(); ++e) out[e] += c * m.cos_coef[e] + s * m.sin_coef[e];
  }
}

TrigField TrigField::partial(int axis) const {
  TrigField out(dim_, rows_, cols_);
  for (const auto& m : modes_) {
    const double w = kTwoPi * m.wave[static_cast<std::size_t>(axis)];
    if (w == 0.0) continue;
    std::vector<double> c(constant_.size()), s(constant_.size());
    for (std::size_t e = 0; e < constant_.size(); ++e) {
      c[e] = w * m.sin_coef[e];
      s[e] = -w * m.cos_coef[e];
    }
    out.add_mode(m.wave, std::move(c), std::move(s));
  }
  return out;
}

TrigField TrigField::divergence() const {
  if (cols_ == 1 && rows_ == dim_) {
    TrigField out(dim_, 1, 1);
    for (int j = 0; j < dim_; ++j) {
      const TrigField dj = partial(j);
      for (const auto& m : dj.modes()) {
        out.add_mode(m.wave, {m.cos_coef[static_cast<std::size_t>(j)]}, {m.sin_coef[static_cast<std::size_t>(j)]});
      }
    }
    return TrigField(dim_, 1, 1) + out;
  }
  require(rows_ == dim_ && cols_ == dim_, ErrorKind::shape, "divergence needs a d x d or d x 1 field");
  TrigField out(dim_, dim_, 1);
  for (int j = 0; j < dim_; ++j) {
    const TrigField dj = partial(j);
    for (const auto& m : dj.modes()) {
      std::vector<double> c(static_cast<std::size_t>(dim_)), s(static_cast<std::size_t>(dim_));
      for (int i = 0; i < dim_; ++i) {
        c[static_cast<std::size_t>(i)] = m.cos_coef[static_cast<std::size_t>(i * dim_ + j)];
        s[static_cast<std::size_t>(i)] = m.sin_coef[static_cast<std::size_t>(i * dim_ + j)];
      }
      out.add_mode(m.wave, std::move(c), std::move(s));
    }
  }
  return TrigField(dim_, dim_, 1) + out;
}

TrigField TrigField::operator+(const TrigField& other) const {
  require(dim_ == other.dim_ && rows_ == other.rows_ && cols_ == other.cols_, ErrorKind::shape,
          "adding fields of different shapes");
  TrigField out = *this;
  for (std::size_t e = 0; e < constant_.size(); ++e) out.constant_[e] += other.constant_[e];
  for (const auto& m : other.modes_) {
    auto same = std::find_if(out.modes_.begin(), out.modes_.end(), [&](const TrigMode& o) { return o.wave == m.wave; });
    if (same == out.modes_.end()) {
      out.modes_.push_back(m);
      continue;
    }
    for (std::size_t e = 0; e < constant_.size(); ++e) {
      same->cos_coef[e] += m.cos_coef[e];
      same->sin_coef[e] += m.sin_coef[e];
    }
  }
  // Drop modes that cancelled exactly (e.g. b - div a2 for the Landau-like preset).
  std::erase_if(out.modes_, [](const TrigMode& m) {
    return std::all_of(m.cos_coef.begin(), m.cos_coef.end(), [](double c) { return c == 0.0; }) &&
           std::all_of(m.sin_coef.begin(), m.sin_coef.end(), [](double c) { return c == 0.0; });
  });
  return out;
}

TrigField TrigField::scaled(double s) const {
  TrigField out = *this;
  for (double& c : out.constant_) c *= s;
  for (auto& m : out.modes_) {
    for (double& c : m.cos_coef) c *= s;
    for (double& c : m.sin_coef) c *= s;
  }
  return out;
}

TrigField TrigField::operator-(const TrigField& other) const { return *this + other.scaled(-1.0); }

double TrigField::sup_bound() const {
  double best = 0.0;
  for (std::size_t e = 0; e < constant_.size(); ++e) {
    double v = std::abs(constant_[e]);
    for (const auto& m : modes_) v += std::hypot(m.cos_coef[e], m.sin_coef[e]);
    best = std::max(best, v);
  }
  return best;
}

double TrigField::lipschitz_bound() const {
  double best = 0.0;
  for (std::size_t e = 0; e < constant_.size(); ++e) {
    double v = 0.0;
    for (const auto& m : modes_) {
      double k1 = 0.0;
      for (int w : m.wave) k1 += std::abs(w);
      v += kTwoPi * k1 * std::hypot(m.cos_coef[e], m.sin_coef[e]);
    }
    best = std::max(best, v);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Field

Field::Field(TrigField series)
    : dim_(series.dim()), rows_(series.rows()), cols_(series.cols()), series_(std::move(series)) {}

Field::Field(int dim, int rows, int cols, Callable fn)
    : dim_(dim), rows_(rows), cols_(cols), fn_(std::move(fn)) {
  require(static_cast<bool>(fn_), ErrorKind::invalid_input, "field callable is empty");
}

void Field::evaluate(std::span<const double> x, std::span<double> out) const {
  if (series_) {
    series_->evaluate(x, out);
  } else {
    fn_(x, out);
  }
}

double Field::scalar(double x) const {
  double out = 0.0;
  evaluate(std::span<const double>(&x, 1), std::span<double>(&out, 1));
  return out;
}

void fd_divergence(const Field& a, std::span<const double> x, std::span<double> out) {
  const int d = a.dim();
  require(a.rows() == d && a.cols() == d, ErrorKind::shape, "fd_divergence expects a d x d field");
  std::array<double, kMaxDim> y{};
  std::vector<double> f[4];
  for (auto& v : f) v.resize(static_cast<std::size_t>(d * d));
  static constexpr double offsets[4] = {2.0, 1.0, -1.0, -2.0};
  for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] = 0.0;
  for (int j = 0; j < d; ++j) {
    for (int s = 0; s < 4; ++s) {
      for (int c = 0; c < d; ++c) y[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(j)] = wrap(x[static_cast<std::size_t>(j)] + offsets[s] * kFdStep);
      a.evaluate(std::span<const double>(y.data(), static_cast<std::size_t>(d)), f[s]);
    }
    for (int i = 0; i < d; ++i) {
      const auto e = static_cast<std::size_t>(i * d + j);
      out[static_cast<std::size_t>(i)] += (-f[0][e] + 8.0 * f[1][e] - 8.0 * f[2][e] + f[3][e]) / (12.0 * kFdStep);
    }
  }
}

// ---------------------------------------------------------------------------
// CoefficientSet

CoefficientSet::CoefficientSet(int dim, Field b, Field a1, Field a2, std::string name)
    : dim_(dim), name_(std::move(name)), b_(std::move(b)), a1_(std::move(a1)), a2_(std::move(a2)) {
  require(dim >= 1 && dim <= kMaxDim, ErrorKind::invalid_input, "dimension must be 1, 2 or 3");
  require(b_.dim() == dim && b_.rows() == dim && b_.cols() == 1, ErrorKind::shape, "b must map T^d to R^d");
  require(a1_.dim() == dim && a1_.rows() == dim && a1_.cols() == dim, ErrorKind::shape, "a1 must be d x d");
  require(a2_.dim() == dim && a2_.rows() == dim && a2_.cols() == dim, ErrorKind::shape, "a2 must be d x d");

  auto divergence_of = [dim](const Field& f, bool& analytic) -> Field {
    if (f.has_series()) {
      analytic = true;
      return Field(f.series().divergence());
    }
    analytic = false;
    return Field(dim, dim, 1, [f](std::span<const double> x, std::span<double> out) { fd_divergence(f, x, out); });
  };
  div_a1_ = divergence_of(a1_, analytic_div_a1_);
  div_a2_ = divergence_of(a2_, analytic_div_a2_);
  if (b_.has_series() && div_a2_.has_series()) {
    b_hat_ = Field(b_.series() - div_a2_.series());
  } else {
    b_hat_ = Field(dim, dim, 1, [b = b_, da = div_a2_, dim](std::span<const double> x, std::span<double> out) {
      std::array<double, kMaxDim> t{};
      b.evaluate(x, out);
      da.evaluate(x, std::span<double>(t.data(), static_cast<std::size_t>(dim)));
      for (int i = 0; i < dim; ++i) out[static_cast<std::size_t>(i)] -= t[static_cast<std::size_t>(i)];
    });
  }
}

double CoefficientSet::lambda1() const {
  require(certificate_.has_value(), ErrorKind::configuration, "coefficient set has not been certified");
  return certificate_->lambda1;
}

double CoefficientSet::eta() const {
  require(certificate_.has_value(), ErrorKind::configuration, "coefficient set has not been certified");
  return certificate_->eta;
}

double CoefficientSet::sup_b_hat(int resolution) const {
  const int g = sup_resolution(dim_, resolution);
  double best = 0.0;
  std::array<double, kMaxDim> v{};
  const std::span<double> out(v.data(), static_cast<std::size_t>(dim_));
  for_each_grid_point(dim_, g, [&](std::span<const double> x) {
    b_hat_.evaluate(x, out);
    for (double c : out) best = std::max(best, std::abs(c));
  });
  if (b_hat_.has_series()) {
    const auto& s = b_hat_.series();
    best = std::min(s.sup_bound(), best + s.lipschitz_bound() * 0.5 / g);
  }
  return best;
}

double CoefficientSet::sup_a2(int resolution) const {
  const int g = sup_resolution(dim_, resolution);
  double best = 0.0;
  for (const auto& m : tabulate_matrix(a2_, g)) best = std::max(best, spectral_norm(m));
  if (a2_.has_series() && dim_ == 1) {
    const auto& s = a2_.series();
    best = std::min(s.sup_bound(), best + s.lipschitz_bound() * 0.5 / g);
  }
  return best;
}

double CoefficientSet::max_diffusion(int resolution) const {
  const int g = sup_resolution(dim_, resolution);
  double m1 = -std::numeric_limits<double>::infinity();
  double m2 = -std::numeric_limits<double>::infinity();
  for (const auto& m : tabulate_matrix(a1_, g)) m1 = std::max(m1, max_eigenvalue(m));
  for (const auto& m : tabulate_matrix(a2_, g)) m2 = std::max(m2, max_eigenvalue(m));
  double slack = 0.0;
  if (a1_.has_series() && a2_.has_series()) {
    slack = dim_ * (a1_.series().lipschitz_bound() + a2_.series().lipschitz_bound()) * 0.5 / g;
  }
  return m1 + m2 + slack;
}

// ---------------------------------------------------------------------------
// Presets and certification

int default_certification_grid(int dim) { return dim == 1 ? 256 : (dim == 2 ? 32 : 12); }

namespace {

void check_finite(const PresetParams& p) {
  for (double v : {p.alpha0, p.alpha1, p.c2, p.eps_a, p.beta0, p.eps_offdiag, p.a1}) {
    require(std::isfinite(v), ErrorKind::configuration, "preset parameters must be finite");
  }
}

TrigField pairwise_diffusion(int d, const PresetParams& p) {
  TrigField a2(d, d, d);
  a2.set_constant(identity_scaled(d, p.c2));
  for (int l = 0; l < d; ++l) {
    std::array<int, kMaxDim> w{};
    w[static_cast<std::size_t>(l)] = 1;
    a2.add_mode(w, identity_scaled(d, p.eps_a / d), {});
  }
  if (d >= 2 && p.eps_offdiag != 0.0) {
    std::vector<double> c(static_cast<std::size_t>(d * d), 0.0);
    c[1] = p.eps_offdiag;
    c[static_cast<std::size_t>(d)] = p.eps_offdiag;
    a2.add_mode({1, 1, 0}, std::move(c), {});
  }
  return a2;
}

}  // namespace

CoefficientSet build_preset(const std::string& name, const PresetParams& p, int d) {
  require(d >= 1 && d <= kMaxDim, ErrorKind::configuration, "dimension must be 1, 2 or 3");
  check_finite(p);
  nlohmann::json desc;
  desc["preset"] = name;
  desc["dim"] = d;
  std::optional<CoefficientSet> cs;
  if (name == "perturbed_constant") {
    require(p.alpha0 > std::abs(p.alpha1), ErrorKind::configuration, "perturbed_constant needs alpha0 > |alpha1|");
    require(p.c2 >= std::abs(p.eps_a) + std::abs(p.eps_offdiag), ErrorKind::configuration,
            "perturbed_constant needs c2 >= |eps_a| + |eps_offdiag|");
    TrigField a1(d, d, d);
    a1.set_constant(identity_scaled(d, p.alpha0));
    TrigField b(d, d, 1);
    for (int l = 0; l < d; ++l) {
      std::array<int, kMaxDim> w{};
      w[static_cast<std::size_t>(l)] = 1;
      if (p.alpha1 != 0.0) a1.add_mode(w, identity_scaled(d, p.alpha1 / d), {});
      std::vector<double> s(static_cast<std::size_t>(d), 0.0);
      s[static_cast<std::size_t>(l)] = p.beta0;
      b.add_mode(w, {}, std::move(s));
    }
    cs.emplace(d, Field(std::move(b)), Field(std::move(a1)), Field(pairwise_diffusion(d, p)), name);
    desc["alpha0"] = p.alpha0;
    desc["alpha1"] = p.alpha1;
    desc["c2"] = p.c2;
    desc["eps_a"] = p.eps_a;
    desc["beta0"] = p.beta0;
    if (d >= 2) desc["eps_offdiag"] = p.eps_offdiag;
  } else if (name == "landau_like") {
    require(p.c2 > std::abs(p.eps_a) + std::abs(p.eps_offdiag), ErrorKind::configuration,
            "landau_like needs c2 > |eps_a| + |eps_offdiag| (a1 = 0 leaves a2 as the only diffusion)");
    TrigField a2 = pairwise_diffusion(d, p);
    TrigField b = a2.divergence();
    TrigField a1(d, d, d);
    cs.emplace(d, Field(std::move(b)), Field(std::move(a1)), Field(std::move(a2)), name);
    desc["c2"] = p.c2;
    desc["eps_a"] = p.eps_a;
    if (d >= 2) desc["eps_offdiag"] = p.eps_offdiag;
  } else if (name == "zero_interaction") {
    require(p.a1 > 0.0, ErrorKind::configuration, "zero_interaction needs a1 > 0");
    TrigField a1(d, d, d);
    a1.set_constant(identity_scaled(d, p.a1));
    cs.emplace(d, Field(TrigField(d, d, 1)), Field(std::move(a1)), Field(TrigField(d, d, d)), name);
    desc["a1"] = p.a1;
  } else {
    fail(ErrorKind::configuration, "unknown preset '" + name + "'");
  }
  cs->description = desc.dump();
  cs->attach_certificate(certify(*cs, default_certification_grid(d)));
  return std::move(*cs);
}

Certificate certify(const CoefficientSet& cs, int resolution, std::optional<double> lipschitz_a1,
                    std::optional<double> lipschitz_a2) {
  require(resolution >= 32 || (cs.dim() > 1 && resolution >= 8), ErrorKind::invalid_input,
          "certification grid must have at least 32 points per axis in d = 1");
  const auto a1 = tabulate_matrix(cs.a1(), resolution);
  const auto a2 = tabulate_matrix(cs.a2(), resolution);
  Certificate c;
  c.grid = resolution;
  const int d = cs.dim();
  if (d == 1) {
    double lo1 = a1[0](0, 0), lo2 = a2[0](0, 0), hi2 = a2[0](0, 0);
    for (const auto& m : a1) lo1 = std::min(lo1, m(0, 0));
    for (const auto& m : a2) {
      lo2 = std::min(lo2, m(0, 0));
      hi2 = std::max(hi2, m(0, 0));
    }
    c.lambda1 = lo1 + lo2;
    c.eta = hi2 - lo2;
  } else {
    require(static_cast<double>(a1.size()) * static_cast<double>(a2.size()) <= static_cast<double>(1 << 26),
            ErrorKind::resource, "certification grid too large for pairwise search");
    c.lambda1 = std::numeric_limits<double>::infinity();
    for (const auto& m1 : a1)
      for (const auto& m2 : a2) c.lambda1 = std::min(c.lambda1, min_eigenvalue(m1 + m2));
    c.eta = 0.0;
    for (std::size_t x = 0; x < a2.size(); ++x)
      for (std::size_t z = x + 1; z < a2.size(); ++z) c.eta = std::max(c.eta, spectral_norm(a2[x] - a2[z]));
  }
  if (!(c.lambda1 > 0.0)) {
    fail(ErrorKind::ellipticity_violation,
         "smallest eigenvalue of a1(v1) + a2(v1 - v2) on the grid is " + std::to_string(c.lambda1));
  }
  c.condition_iv_holds = c.eta < c.lambda1;
  const double r = 0.5 / resolution;
  if (lipschitz_a1 && lipschitz_a2) {
    c.lambda1_lower = c.lambda1 - d * (*lipschitz_a1 + *lipschitz_a2) * r;
  }
  if (lipschitz_a2) c.eta_upper = c.eta + 2.0 * d * *lipschitz_a2 * r;
  return c;
}

std::string Certificate::to_json() const {
  nlohmann::json j;
  j["lambda1"] = lambda1;
  j["eta"] = eta;
  j["condition_iv_holds"] = condition_iv_holds;
  j["grid"] = grid;
  if (lambda1_lower) j["lambda1_lower"] = *lambda1_lower;
  if (eta_upper) j["eta_upper"] = *eta_upper;
  j["note"] = "grid extrema; suprema may exceed them by O(1/grid) without a Lipschitz bound";
  return j.dump(2);
}

SymMatrix effective_diffusion(const CoefficientSet& cs, std::span<const double> positions, int i,
                              bool include_self) {
  const int d = cs.dim();
  require(positions.size() % static_cast<std::size_t>(d) == 0, ErrorKind::shape, "positions must be N x d");
  const int n = static_cast<int>(positions.size() / static_cast<std::size_t>(d));
  require(i >= 0 && i < n, ErrorKind::invalid_input, "particle index out of range");
  std::vector<double> buf(static_cast<std::size_t>(d * d));
  const auto vi = positions.subspan(static_cast<std::size_t>(i * d), static_cast<std::size_t>(d));
  cs.a1().evaluate(vi, buf);
  SymMatrix out = to_matrix(buf, d);
  SymMatrix acc = SymMatrix::Zero(d, d);
  std::array<double, kMaxDim> diff{};
  int terms = 0;
  for (int j = 0; j < n; ++j) {
    if (j == i && !include_self) continue;
    for (int a = 0; a < d; ++a) {
      diff[static_cast<std::size_t>(a)] = wrap(vi[static_cast<std::size_t>(a)] - positions[static_cast<std::size_t>(j * d + a)]);
    }
    cs.a2().evaluate(std::span<const double>(diff.data(), static_cast<std::size_t>(d)), buf);
    acc += to_matrix(buf, d);
    ++terms;
  }
  if (terms > 0) out += acc / static_cast<double>(include_self ? n : terms);
  return out;
}

SymMatrix sqrt_spd(const SymMatrix& a) {
  require(a.rows() == a.cols() && a.rows() >= 1 && a.rows() <= kMaxDim, ErrorKind::shape,
          "sqrt_spd expects a square matrix of size 1..3");
  if (a.rows() == 1) {
    const double v = a(0, 0);
    require(v >= -kSpdFloor * std::max(1.0, std::abs(v)), ErrorKind::not_spd, "negative diffusion " + std::to_string(v));
    SymMatrix s(1, 1);
    s(0, 0) = std::sqrt(std::max(v, 0.0));
    return s;
  }
  Eigen::SelfAdjointEigenSolver<SymMatrix> es(a);
  const auto& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  require(ev(0) >= -kSpdFloor * scale, ErrorKind::not_spd,
          "matrix has eigenvalue " + std::to_string(ev(0)));
  const SmallVector root = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

FieldValues evaluate_fields(const CoefficientSet& cs, std::span<const double> x) {
  const int d = cs.dim();
  require(x.size() == static_cast<std::size_t>(d), ErrorKind::shape, "point dimension mismatch");
  std::vector<double> m(static_cast<std::size_t>(d * d)), v(static_cast<std::size_t>(d));
  FieldValues out;
  cs.b().evaluate(x, v);
  out.b = to_vector(v);
  cs.a1().evaluate(x, m);
  out.a1 = to_matrix(m, d);
  cs.a2().evaluate(x, m);
  out.a2 = to_matrix(m, d);
  cs.div_a1().evaluate(x, v);
  out.div_a1 = to_vector(v);
  cs.div_a2().evaluate(x, v);
  out.div_a2 = to_vector(v);
  cs.b_hat().evaluate(x, v);
  out.b_hat = to_vector(v);
  out.analytic_div_a1 = cs.analytic_div_a1();
  out.analytic_div_a2 = cs.analytic_div_a2();
  return out;
}

}  // namespace chaoslab
