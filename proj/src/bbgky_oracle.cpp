#include "chaoslab/bbgky_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "chaoslab/kernels/reduce.hpp"

namespace chaoslab {

namespace {

std::size_t pow_size(int G, int e) {
  std::size_t n = 1;
  for (int i = 0; i < e; ++i) n *= static_cast<std::size_t>(G);
  return n;
}

int mod(int a, int G) {
  const int r = a % G;
  return r < 0 ? r + G : r;
}

// Coordinates of a row-major cell index on an m-axis grid.
void decode(std::size_t idx, int m, int G, int* c) {
  for (int a = m - 1; a >= 0; --a) {
    c[a] = static_cast<int>(idx % static_cast<std::size_t>(G));
    idx /= static_cast<std::size_t>(G);
  }
}

std::size_t index_of_times(const std::vector<double>& times, double t) {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
  fail(ErrorKind::invalid_input, "no snapshot at t = " + std::to_string(t));
}

// Static face coefficients of the joint equation, one array per axis; entry
// idx is the face between cell idx and its +1 neighbour along that axis.
struct JointFaces {
  std::vector<std::vector<double>> D, U;
  double max_D = 0.0;
};

JointFaces joint_faces(int N, int G, const CoefficientSet& cs, bool include_self) {
  const double h = 1.0 / G;
  const auto g = static_cast<std::size_t>(G);
  std::vector<double> a1f(g), da1f(g), a2tab(g), bhtab(g);
  for (std::size_t m = 0; m < g; ++m) {
    const double xf = wrap((static_cast<double>(m) + 1.0) * h);
    a1f[m] = cs.a1().scalar(xf);
    da1f[m] = cs.div_a1().scalar(xf);
    // face (m + 1) h minus centre (c + 1/2) h = (m - c + 1/2) h
    const double xd = wrap((static_cast<double>(m) + 0.5) * h);
    a2tab[m] = cs.a2().scalar(xd);
    bhtab[m] = cs.b_hat().scalar(xd);
  }
  const double w = include_self ? 1.0 / N : (N > 1 ? 1.0 / (N - 1) : 0.0);
  const double a2_self = include_self ? cs.a2().scalar(0.0) : 0.0;
  const double b_self = include_self ? cs.b().scalar(0.0) : 0.0;

  const std::size_t n = pow_size(G, N);
  JointFaces f;
  f.D.assign(static_cast<std::size_t>(N), std::vector<double>(n));
  f.U.assign(static_cast<std::size_t>(N), std::vector<double>(n));
  for (int a = 0; a < N; ++a) {
    double* D = f.D[static_cast<std::size_t>(a)].data();
    double* U = f.U[static_cast<std::size_t>(a)].data();
    for (std::size_t idx = 0; idx < n; ++idx) {
      int c[kMaxJointParticles];
      decode(idx, N, G, c);
      const auto m = static_cast<std::size_t>(c[a]);
      double sd = a2_self, su = b_self;
      for (int j = 0; j < N; ++j) {
        if (j == a) continue;
        const auto q = static_cast<std::size_t>(mod(c[a] - c[j], G));
        sd += a2tab[q];
        su += bhtab[q];
      }
      D[idx] = a1f[m] + w * sd;
      U[idx] = w * su - da1f[m];
      f.max_D = std::max(f.max_D, D[idx]);
    }
  }
  return f;
}

// One explicit sweep along `axis`: out = in + dt/h (F_m - F_{m-1}).
void axis_step(const double* in, double* out, const double* D, const double* U, int N, int G, int axis,
               double dt) {
  const std::size_t g = static_cast<std::size_t>(G);
  const std::size_t inner = pow_size(G, N - 1 - axis);
  const std::size_t outer = pow_size(G, axis);
  const double inv_h = static_cast<double>(G);
  const double r = dt * inv_h;
  const std::size_t total = outer * g * inner;
  if (inner == 1) {
#pragma omp parallel for schedule(static) if (total >= 65536)
    for (std::size_t o = 0; o < outer; ++o) {
      const double* __restrict p = in + o * g;
      const double* __restrict d = D + o * g;
      const double* __restrict u = U + o * g;
      double* __restrict q = out + o * g;
      auto flux = [&](std::size_t m, std::size_t next) {
        return d[m] * (p[next] - p[m]) * inv_h - u[m] * 0.5 * (p[m] + p[next]);
      };
      double left = flux(g - 1, 0);
      for (std::size_t m = 0; m < g; ++m) {
        const double right = flux(m, m + 1 == g ? 0 : m + 1);
        q[m] = p[m] + r * (right - left);
        left = right;
      }
    }
    return;
  }
  const std::size_t rows = outer * g;
#pragma omp parallel for schedule(static) if (total >= 65536)
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t o = row / g, m = row % g;
    const std::size_t up = m + 1 == g ? 0 : m + 1;
    const std::size_t dn = m == 0 ? g - 1 : m - 1;
    const std::size_t base = o * g * inner;
    const double* __restrict cu = in + base + m * inner;
    const double* __restrict nx = in + base + up * inner;
    const double* __restrict pv = in + base + dn * inner;
    const double* __restrict dm = D + base + m * inner;
    const double* __restrict um = U + base + m * inner;
    const double* __restrict dp = D + base + dn * inner;
    const double* __restrict upv = U + base + dn * inner;
    double* __restrict q = out + base + m * inner;
    for (std::size_t l = 0; l < inner; ++l) {
      const double right = dm[l] * (nx[l] - cu[l]) * inv_h - um[l] * 0.5 * (cu[l] + nx[l]);
      const double left = dp[l] * (cu[l] - pv[l]) * inv_h - upv[l] * 0.5 * (pv[l] + cu[l]);
      q[l] = cu[l] + r * (right - left);
    }
  }
}

}  // namespace

std::size_t JointSolution::index(double time) const { return index_of_times(times, time); }

GriddedDensity initial_joint_density(const InitialLaw& law, int N, int resolution) {
  require(N >= 1 && N <= kMaxJointParticles, ErrorKind::configuration, "joint densities support N in {1, 2, 3}");
  const std::size_t n = checked_cell_count(N, resolution);
  auto component = [&](double shift) {
    return cell_average_density(resolution, [&](double x) { return initial_density(law, x, shift); });
  };
  std::vector<double> out(n, 0.0);
  std::vector<GriddedDensity> parts;
  if (law.kind == InitialLaw::Kind::exchangeable_mixture) {
    const double s = law.separation / std::sqrt(static_cast<double>(N));
    parts.push_back(component(s));
    parts.push_back(component(-s));
  } else {
    parts.push_back(component(0.0));
  }
  const double weight = 1.0 / static_cast<double>(parts.size());
  for (const auto& p : parts) {
    const auto prod = product_density(p, N);
    for (std::size_t i = 0; i < n; ++i) out[i] += weight * prod[i];
  }
  return GriddedDensity::normalized(N, resolution, std::move(out));
}

JointSolution solve_joint_fp(int N, const CoefficientSet& cs, const GriddedDensity& initial, double T,
                             std::vector<double> times, double dt_max, bool include_self) {
  require(N >= 1 && N <= kMaxJointParticles, ErrorKind::configuration, "the joint solver supports N in {1, 2, 3}");
  require(cs.dim() == 1, ErrorKind::shape, "the joint solver is one-dimensional");
  require(initial.axes() == N, ErrorKind::shape, "initial joint density must have N axes");
  require(initial.min_value() > 0.0, ErrorKind::positivity_loss, "initial density must be strictly positive");
  require(T >= 0.0, ErrorKind::invalid_input, "horizon must be nonnegative");
  require(std::is_sorted(times.begin(), times.end()), ErrorKind::invalid_input, "snapshot times must be sorted");
  for (double t : times) require(t >= 0.0 && t <= T + 1e-12, ErrorKind::invalid_input, "snapshot time outside [0, T]");
  const int G = initial.resolution();
  const std::size_t n = checked_cell_count(N, G);
  if (dt_max <= 0.0) dt_max = cfl_step(cs, G);

  const auto faces = joint_faces(N, G, cs, include_self);
  const double h = 1.0 / G;
  const double cfl = kCflSafety * h * h / (2.0 * faces.max_D);

  std::vector<int> order(static_cast<std::size_t>(N));
  std::vector<std::vector<int>> orders;
  std::iota(order.begin(), order.end(), 0);
  do orders.push_back(order);
  while (std::next_permutation(order.begin(), order.end()));
  const double inv_orders = 1.0 / static_cast<double>(orders.size());

  JointSolution sol;
  sol.N = N;
  sol.resolution = G;
  sol.include_self = include_self;
  std::vector<double> rho(initial.values().begin(), initial.values().end());
  std::vector<double> acc(n), bufA(n), bufB(n);
  double now = 0.0;

  for (double target : times) {
    const std::int64_t steps = substep_count(target - now, dt_max);
    if (steps > 0) {
      const double dt = (target - now) / static_cast<double>(steps);
      if (dt > cfl * (1.0 + 1e-12))
        fail(ErrorKind::step_size, "dt_pde = " + std::to_string(dt) + " exceeds the CFL bound " + std::to_string(cfl));
      sol.dt_pde = std::max(sol.dt_pde, dt);
      for (std::int64_t s = 0; s < steps; ++s) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (const auto& ord : orders) {
          const double* src = rho.data();
          double* dst = bufA.data();
          for (int a : ord) {
            const auto ax = static_cast<std::size_t>(a);
            axis_step(src, dst, faces.D[ax].data(), faces.U[ax].data(), N, G, a, dt);
            src = dst;
            dst = dst == bufA.data() ? bufB.data() : bufA.data();
          }
          double* __restrict ac = acc.data();
          const double* __restrict sv = src;
#pragma omp simd
          for (std::size_t i = 0; i < n; ++i) ac[i] += sv[i];
        }
        double* __restrict p = rho.data();
        const double* __restrict ac = acc.data();
#pragma omp simd
        for (std::size_t i = 0; i < n; ++i) p[i] = ac[i] * inv_orders;
        const double lo = kernels::lane_min(rho.data(), n, std::numeric_limits<double>::infinity());
        if (!(lo >= kPositivityFloor)) {
          fail(ErrorKind::positivity_loss, "joint density minimum " + std::to_string(lo) + " at t = " +
                                               std::to_string(now + static_cast<double>(s + 1) * dt));
        }
      }
      sol.steps += steps;
      now = target;
    }
    sol.times.push_back(target);
    sol.densities.emplace_back(N, G, rho);
  }
  return sol;
}

double max_axis_asymmetry(const GriddedDensity& rho) {
  const int m = rho.axes(), G = rho.resolution();
  require(m <= kMaxJointParticles, ErrorKind::shape, "asymmetry check supports up to 3 axes");
  double worst = 0.0;
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      for (std::size_t idx = 0; idx < rho.size(); ++idx) {
        int c[kMaxJointParticles];
        decode(idx, m, G, c);
        std::swap(c[a], c[b]);
        std::size_t j = 0;
        for (int e = 0; e < m; ++e) j = j * static_cast<std::size_t>(G) + static_cast<std::size_t>(c[e]);
        worst = std::max(worst, std::abs(rho[idx] - rho[j]));
      }
    }
  }
  return worst;
}

Epsilons choose_epsilons(double lambda1, double eta) {
  require(lambda1 > 0.0 && eta >= 0.0, ErrorKind::invalid_input, "need lambda1 > 0 and eta >= 0");
  if (eta >= lambda1) {
    fail(ErrorKind::infeasible, "eta = " + std::to_string(eta) + " >= lambda1 = " + std::to_string(lambda1) +
                                    ": no epsilon split closes the inequality");
  }
  Epsilons e;
  e.eps = 0.5;
  double small = 0.01 * lambda1;
  auto c1 = [&] { return lambda1 - 3.0 * small - eta / (4.0 * e.eps); };
  if (!(c1() > eta * e.eps)) small = (lambda1 - eta) / 6.0;
  e.eps1 = e.eps2 = e.eps3 = small;
  e.c1 = c1();
  e.c2 = eta * e.eps;
  return e;
}

GradientField log_product_gradient(const GriddedDensity& mu, int k) {
  require(mu.axes() == 1, ErrorKind::shape, "log_product_gradient expects a one-axis density");
  const int G = mu.resolution();
  const auto g = static_cast<std::size_t>(G);
  std::vector<double> L(g);
  for (std::size_t c = 0; c < g; ++c) {
    const std::size_t up = c + 1 == g ? 0 : c + 1, dn = c == 0 ? g - 1 : c - 1;
    L[c] = (std::log(mu[up]) - std::log(mu[dn])) * (0.5 * G);
  }
  const std::size_t n = checked_cell_count(k, G);
  GradientField out{k, G, std::vector<double>(n * static_cast<std::size_t>(k))};
  for (std::size_t idx = 0; idx < n; ++idx) {
    int c[kMaxJointParticles + 1];
    decode(idx, k, G, c);
    for (int i = 0; i < k; ++i) out.components[static_cast<std::size_t>(i) * n + idx] = L[static_cast<std::size_t>(c[i])];
  }
  return out;
}

double cancellation_integral(const GriddedDensity& mu, const CoefficientSet& cs) {
  require(mu.axes() == 1, ErrorKind::shape, "cancellation_integral expects a one-axis density");
  const int G = mu.resolution();
  const auto g = static_cast<std::size_t>(G);
  const double h = mu.mesh();
  std::vector<double> a2d(g), conv(g, 0.0);
  for (std::size_t q = 0; q < g; ++q) a2d[q] = cs.a2().scalar(static_cast<double>(q) * h);
  for (int c = 0; c < G; ++c)
    for (int y = 0; y < G; ++y) conv[static_cast<std::size_t>(c)] += h * a2d[static_cast<std::size_t>(mod(c - y, G))] * mu[static_cast<std::size_t>(y)];
  double total = 0.0;
  for (int v1 = 0; v1 < G; ++v1) {
    const double base = conv[static_cast<std::size_t>(v1)];
    for (int v2 = 0; v2 < G; ++v2) {
      const double f2 = a2d[static_cast<std::size_t>(mod(v1 - v2, G))] - base;
      const double w12 = mu[static_cast<std::size_t>(v1)] * mu[static_cast<std::size_t>(v2)];
      for (int v3 = 0; v3 < G; ++v3) {
        const double f3 = a2d[static_cast<std::size_t>(mod(v1 - v3, G))] - base;
        total += w12 * mu[static_cast<std::size_t>(v3)] * f2 * f3;
      }
    }
  }
  return total * h * h * h;
}

EntropyProductionReport evaluate_entropy_production(const JointSolution& joint, const MeanFieldSolution& mf,
                                                    const CoefficientSet& cs, int k, const Epsilons& eps) {
  const int N = joint.N, G = joint.resolution;
  require(k >= 1 && k <= N, ErrorKind::invalid_input, "need 1 <= k <= N");
  require(joint.include_self, ErrorKind::configuration, "entropy production assumes the self-inclusive system");
  require(mf.resolution == G, ErrorKind::shape, "mean-field and joint solutions must share a resolution");
  require(eps.eps > 0 && eps.eps1 > 0 && eps.eps2 > 0 && eps.eps3 > 0, ErrorKind::invalid_input,
          "epsilons must be positive");
  const auto g = static_cast<std::size_t>(G);
  const double h = 1.0 / G;
  const double invN = 1.0 / N;
  const double rest = static_cast<double>(N - k) / N;

  // Kernels at lattice differences q h, one-point values at cell centres.
  std::vector<double> a2d(g), bhd(g), a1c(g);
  for (std::size_t q = 0; q < g; ++q) {
    a2d[q] = cs.a2().scalar(static_cast<double>(q) * h);
    bhd[q] = cs.b_hat().scalar(static_cast<double>(q) * h);
    a1c[q] = cs.a1().scalar((static_cast<double>(q) + 0.5) * h);
  }
  const double b0 = cs.b().scalar(0.0);

  // Constants: certified values, widened by what the grid itself sees.
  EntropyProductionReport rep;
  rep.N = N;
  rep.k = k;
  rep.epsilons = eps;
  {
    double lam = cs.lambda1(), lo_a2 = a2d[0], hi_a2 = a2d[0], sb = cs.sup_b_hat(), sa = cs.sup_a2();
    for (std::size_t q = 0; q < g; ++q) {
      lo_a2 = std::min(lo_a2, a2d[q]);
      hi_a2 = std::max(hi_a2, a2d[q]);
      sb = std::max(sb, std::abs(bhd[q]));
      sa = std::max(sa, std::abs(a2d[q]));
      for (std::size_t c = 0; c < g; ++c) lam = std::min(lam, a1c[c] + a2d[q]);
    }
    rep.lambda1 = lam;
    rep.eta = std::max(cs.eta(), hi_a2 - lo_a2);
    rep.sup_b_hat = sb;
    rep.sup_a2 = sa;
  }

  const std::size_t nk = checked_cell_count(k, G);
  const std::size_t nk1 = k < N ? checked_cell_count(k + 1, G) : 0;
  const double vol_k = std::pow(h, k), vol_k1 = std::pow(h, k + 1);

  for (std::size_t s = 0; s < joint.times.size(); ++s) {
    const double t = joint.times[s];
    const auto& mu = mf.at(t);
    EntropyProductionRow row;
    row.time = t;
    row.C_t = mf.grad_log_sup[mf.index(t)];

    std::vector<double> a2c(g, 0.0), bhc(g, 0.0);
    for (int c = 0; c < G; ++c) {
      for (int y = 0; y < G; ++y) {
        const auto q = static_cast<std::size_t>(mod(c - y, G));
        a2c[static_cast<std::size_t>(c)] += h * a2d[q] * mu[static_cast<std::size_t>(y)];
        bhc[static_cast<std::size_t>(c)] += h * bhd[q] * mu[static_cast<std::size_t>(y)];
      }
    }
    const auto Lk = log_product_gradient(mu, k);

    const auto& full = joint.densities[s];
    const auto muk = marginalize(full, k);

    // log of the ratio mu^k / mu^{(x)k}; cells under the floor are excluded.
    std::vector<double> ratio(nk), logr(nk);
    std::vector<char> excluded(nk, 0);
    double excluded_mass = 0.0;
    for (std::size_t idx = 0; idx < nk; ++idx) {
      int c[kMaxJointParticles];
      decode(idx, k, G, c);
      double prod = 1.0;
      for (int i = 0; i < k; ++i) prod *= mu[static_cast<std::size_t>(c[i])];
      if (muk[idx] < kConditionalFloor) {
        excluded[idx] = 1;
        excluded_mass += prod * vol_k;
        ratio[idx] = 1.0;
        logr[idx] = 0.0;
        continue;
      }
      ratio[idx] = muk[idx] / prod;
      logr[idx] = std::log(muk[idx]) - std::log(prod);
    }
    if (excluded_mass > kExcludedMassLimit) {
      fail(ErrorKind::conditional_density, "k-marginal below the floor on reference mass " + std::to_string(excluded_mass) +
                                               " at t = " + std::to_string(t));
    }
    row.excluded_mass = excluded_mass;
    const auto gk = periodic_gradient(GridFunction{k, G, logr});
    const auto dr = periodic_gradient(GridFunction{k, G, ratio});

    double H = 0, fisher = 0, chi = 0, energy = 0, tI = 0, tJ = 0, dk = 0, dkk = 0, remI = 0, remJ = 0;
    for (std::size_t idx = 0; idx < nk; ++idx) {
      if (excluded[idx]) continue;
      int c[kMaxJointParticles];
      decode(idx, k, G, c);
      const double m = muk[idx];
      H += m * logr[idx];
      chi += m * ratio[idx];
      for (int i = 0; i < k; ++i) {
        const auto ci = static_cast<std::size_t>(c[i]);
        const double gi = gk.axis(i)[idx];
        const double dri = dr.axis(i)[idx];
        double A = 0, Dsum = 0, bsum = b0;
        for (int j = 0; j < k; ++j) {
          const auto q = static_cast<std::size_t>(mod(c[i] - c[j], G));
          A += a2d[q] - a2c[ci];
          Dsum += a1c[ci] + a2d[q];
          if (j != i) bsum += bhd[q];
        }
        const double B = invN * bsum - static_cast<double>(k) * invN * bhc[ci];
        const double L = Lk.axis(i)[idx];
        fisher += m * gi * gi;
        energy += m * dri * dri;
        tI -= invN * m * A * L * gi;
        tJ += m * B * gi;
        dk += invN * m * Dsum * gi * gi;
        dkk += rest * m * (a1c[ci] + a2c[ci]) * gi * gi;
        remI += m * A * A;
        remJ += m * B * B;
      }
    }
    row.H_k = H * vol_k;
    row.fisher_k = fisher * vol_k;
    row.chi2_k = chi * vol_k - 1.0;
    row.energy_k = energy * vol_k;
    row.term_I = tI * vol_k;
    row.term_J = tJ * vol_k;
    row.dissipation_k = dk * vol_k;
    row.dissipation_rest = dkk * vol_k;
    remI *= vol_k;
    remJ *= vol_k;

    double fisher_k1_first = 0.0;  // sum over i <= k only
    if (k < N) {
      const auto muk1 = marginalize(full, k + 1);
      std::vector<double> logr1(nk1);
      for (std::size_t idx = 0; idx < nk1; ++idx) {
        int c[kMaxJointParticles + 1];
        decode(idx, k + 1, G, c);
        double lp = 0.0;
        for (int i = 0; i <= k; ++i) lp += std::log(mu[static_cast<std::size_t>(c[i])]);
        logr1[idx] = std::log(std::max(muk1[idx], std::numeric_limits<double>::min())) - lp;
      }
      const auto gk1 = periodic_gradient(GridFunction{k + 1, G, logr1});

      double H1 = 0, F1 = 0, F1first = 0, K2 = 0, K3 = 0, K4 = 0;
      for (std::size_t idx = 0; idx < nk1; ++idx) {
        const std::size_t base = idx / g;
        const double m = muk1[idx];
        H1 += m * logr1[idx];
        for (int i = 0; i <= k; ++i) F1 += m * gk1.axis(i)[idx] * gk1.axis(i)[idx];
        if (excluded[base]) continue;
        int c[kMaxJointParticles + 1];
        decode(idx, k + 1, G, c);
        for (int i = 0; i < k; ++i) {
          const auto ci = static_cast<std::size_t>(c[i]);
          const auto q = static_cast<std::size_t>(mod(c[i] - c[k], G));
          const double gi = gk.axis(i)[base];
          const double fluct = a2c[ci] - a2d[q];
          const double gi1 = gk1.axis(i)[idx];
          F1first += m * gi1 * gi1;
          K2 += m * (bhd[q] - bhc[ci]) * gi;
          K3 += m * fluct * Lk.axis(i)[base] * gi;
          K4 += m * fluct * gi1 * gi;
        }
      }
      row.H_k1 = H1 * vol_k1;
      row.fisher_k1 = F1 * vol_k1;
      fisher_k1_first = F1first * vol_k1;
      row.K2 = rest * K2 * vol_k1;
      row.K3 = rest * K3 * vol_k1;
      row.K4 = rest * K4 * vol_k1;

      // Towering and the Pinsker step, one conditional law per base point.
      double tower = 0.0;
      double worst = -std::numeric_limits<double>::infinity();
      for (std::size_t base = 0; base < nk; ++base) {
        if (excluded[base]) continue;
        int c[kMaxJointParticles];
        decode(base, k, G, c);
        double rel = 0.0;
        for (std::size_t y = 0; y < g; ++y) {
          const double cond = muk1[base * g + y] / muk[base];
          if (cond > 0.0) rel += h * cond * std::log(cond / mu[y]);
        }
        tower += muk[base] * rel;
        for (int i = 0; i < k; ++i) {
          double pair = 0.0;
          for (std::size_t y = 0; y < g; ++y) {
            const auto q = static_cast<std::size_t>(mod(c[i] - static_cast<int>(y), G));
            pair += h * bhd[q] * (muk1[base * g + y] / muk[base] - mu[y]);
          }
          worst = std::max(worst, std::abs(pair) - rep.sup_b_hat * std::sqrt(2.0 * std::max(rel, 0.0)));
        }
      }
      row.towering_residual = std::abs(tower * vol_k - (row.H_k1 - row.H_k));
      row.pinsker_worst = worst;
    } else {
      row.H_k1 = row.H_k;
      row.fisher_k1 = row.fisher_k;
    }

    row.identity = row.term_I + row.term_J + row.K2 + row.K3 + row.K4 - row.dissipation_k - row.dissipation_rest;

    const double Ct2 = row.C_t * row.C_t;
    const double dH = std::max(row.H_k1 - row.H_k, 0.0);
    const double sb2 = rep.sup_b_hat * rep.sup_b_hat, sa2 = rep.sup_a2 * rep.sup_a2;
    const double rem_I = Ct2 / (4.0 * eps.eps1 * N * N) * remI;
    const double rem_J = remJ / (4.0 * eps.eps2);
    row.bound_I = eps.eps1 * row.fisher_k + rem_I;
    row.bound_J = eps.eps2 * row.fisher_k + rem_J;
    row.bound_K2 = rest * (0.5 * eps.eps3 * row.fisher_k + k * sb2 * dH / eps.eps3);
    row.bound_K3 = rest * (0.5 * eps.eps3 * row.fisher_k + k * Ct2 * sa2 * dH / eps.eps3);
    row.bound_K4 = rest * (rep.eta * eps.eps * fisher_k1_first + rep.eta / (4.0 * eps.eps) * row.fisher_k);
    const double rem_K = rest * k * (sb2 + Ct2 * sa2) * dH / eps.eps3;
    row.rhs = (-rep.lambda1 + eps.eps1 + eps.eps2 + eps.eps3 + rep.eta / (4.0 * eps.eps)) * row.fisher_k +
              rep.eta * eps.eps * (k < N ? row.fisher_k1 : 0.0) + rem_I + rem_J + rem_K;
    rep.rows.push_back(row);
  }

  // Centered differences of H_k at interior snapshots.
  const std::size_t n = rep.rows.size();
  for (std::size_t s = 0; s < n; ++s) {
    auto& row = rep.rows[s];
    if (s == 0 || s + 1 == n) {
      row.lhs = row.margin = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    row.lhs = (rep.rows[s + 1].H_k - rep.rows[s - 1].H_k) / (rep.rows[s + 1].time - rep.rows[s - 1].time);
    row.margin = row.rhs - row.lhs;
  }
  return rep;
}

double EntropyProductionReport::min_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : rows)
    if (!std::isnan(r.margin)) m = std::min(m, r.margin);
  return m;
}

std::string EntropyProductionReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "time,H_k,H_k1,Fisher_k,Fisher_k1,term_I,term_J,K2,K3,K4,lhs,rhs,margin,chi2_k,energy_k,"
        "dissipation_k,dissipation_rest,identity,bound_I,bound_J,bound_K2,bound_K3,bound_K4,C_t,"
        "towering_residual,pinsker_worst,excluded_mass\n";
  for (const auto& r : rows) {
    const double v[] = {r.time,          r.H_k,          r.H_k1,      r.fisher_k,       r.fisher_k1,
                        r.term_I,        r.term_J,       r.K2,        r.K3,             r.K4,
                        r.lhs,           r.rhs,          r.margin,    r.chi2_k,         r.energy_k,
                        r.dissipation_k, r.dissipation_rest, r.identity, r.bound_I,     r.bound_J,
                        r.bound_K2,      r.bound_K3,     r.bound_K4,  r.C_t,            r.towering_residual,
                        r.pinsker_worst, r.excluded_mass};
    for (std::size_t i = 0; i < std::size(v); ++i) os << (i ? "," : "") << v[i];
    os << '\n';
  }
  return os.str();
}

void write_report_csv(const EntropyProductionReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  out << report.to_csv();
}

}  // namespace chaoslab
