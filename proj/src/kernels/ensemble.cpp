#include "chaoslab/kernels/ensemble.hpp"

#include <bit>
#include <cmath>
#include <exception>
#include <limits>

#include <omp.h>

#include "chaoslab/exact_sum.hpp"
#include "chaoslab/kernels/random_batch.hpp"
#include "chaoslab/particle_system.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus_grid.hpp"

namespace chaoslab::kernels {

std::array<double, 2> dynamics_normal_pair(std::uint64_t seed, std::uint32_t replica, std::uint32_t particle,
                                           std::uint64_t block) noexcept {
  const rng::Counter ctr{static_cast<std::uint32_t>(block), particle, replica,
                         (static_cast<std::uint32_t>(rng::Purpose::dynamics) << 24) |
                             static_cast<std::uint32_t>((block >> 32) & 0xFFFFFFu)};
  return rng::normal2(rng::key_from_seed(seed), ctr);
}

namespace {

constexpr double kFixedScale = 0x1p50;
constexpr int kFixedMaxN = 4096;

// Order-independent sum of values in [-1, 1].
double moment_sum(const double* v, std::size_t stride, int n) {
  if (n <= kFixedMaxN) {
    // Adding 1.5 * 2^52 rounds x * 2^50 to an integer held in the low mantissa
    // bits; the integer difference of bit patterns recovers it exactly.
    constexpr double magic = 0x1.8p52;
    const auto magic_bits = std::bit_cast<std::int64_t>(magic);
    std::int64_t acc = 0;
    for (int i = 0; i < n; ++i) {
      acc += std::bit_cast<std::int64_t>(v[static_cast<std::size_t>(i) * stride] * kFixedScale + magic) - magic_bits;
    }
    return static_cast<double>(acc) / kFixedScale;
  }
  ExactSum s;
  for (int i = 0; i < n; ++i) s.add(v[static_cast<std::size_t>(i) * stride]);
  return s.value();
}

// Square root of a symmetric 2x2 matrix [[a, b], [b, c]] (closed form).
void sqrt_2x2(double a, double b, double c, double out[4]) {
  const double det = a * c - b * b;
  const double sd = std::sqrt(std::max(det, 0.0));
  const double t = std::sqrt(a + c + 2.0 * sd);
  out[0] = (a + sd) / t;
  out[1] = out[2] = b / t;
  out[3] = (c + sd) / t;
}

// d = 1 step: structure-of-arrays loops that the compiler vectorizes.
// drift/diff are scratch of length N.
void step_1d(const PairwiseSeries& p, int N, double dt, bool include_self, double* v, const double* z,
             ReplicaWorkspace& ws, double* drift, double* diff) {
  const auto n = static_cast<std::size_t>(N);
  const auto nw = p.waves.size();
  ws.cosv.resize(n * nw);
  ws.sinv.resize(n * nw);
  ws.moments_c.resize(nw);
  ws.moments_s.resize(nw);
  const bool pair_terms = include_self || N > 1;
  const double inv_count = include_self ? 1.0 / N : (N > 1 ? 1.0 / (N - 1) : 0.0);
  const double self_weight = include_self ? 0.0 : 1.0;
  const double noise_scale = std::sqrt(2.0 * dt);
  const double b0 = pair_terms ? p.b0[0] : 0.0;
  const double d0 = p.a10[0] + (pair_terms ? p.a20[0] : 0.0);

  for (std::size_t w = 0; w < nw; ++w) {
    const double k = p.waves[w][0];
    double* cw = ws.cosv.data() + w * n;
    double* sw = ws.sinv.data() + w * n;
    for (std::size_t i = 0; i < n; ++i) sincos_2pi(k * v[i], sw[i], cw[i]);
    if (p.pairwise[w]) {
      ws.moments_c[w] = moment_sum(cw, 1, N);
      ws.moments_s[w] = moment_sum(sw, 1, N);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    drift[i] = b0;
    diff[i] = d0;
  }
  for (std::size_t w = 0; w < nw; ++w) {
    const double* cw = ws.cosv.data() + w * n;
    const double* sw = ws.sinv.data() + w * n;
    const double a1c = p.a1_cos[w], a1s = p.a1_sin[w];
    if (p.pairwise[w] && pair_terms) {
      const double bc = p.b_cos[w], bs = p.b_sin[w], ac = p.a2_cos[w], as = p.a2_sin[w];
      const double C = ws.moments_c[w], S = ws.moments_s[w];
      for (std::size_t i = 0; i < n; ++i) {
        const double mc = (C - self_weight * cw[i]) * inv_count;
        const double ms = (S - self_weight * sw[i]) * inv_count;
        const double P = cw[i] * mc + sw[i] * ms;
        const double Q = sw[i] * mc - cw[i] * ms;
        drift[i] += bc * P + bs * Q;
        diff[i] += ac * P + as * Q + a1c * cw[i] + a1s * sw[i];
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) diff[i] += a1c * cw[i] + a1s * sw[i];
    }
  }
  double min_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    min_d = std::min(min_d, diff[i]);
    const double x = v[i] + dt * drift[i] + noise_scale * std::sqrt(std::max(diff[i], 0.0)) * z[i];
    const double r = x - std::floor(x);
    v[i] = r < 1.0 ? r : 0.0;
  }
  if (!(min_d >= 0.0)) fail(ErrorKind::not_spd, "negative effective diffusion " + std::to_string(min_d));
}

// One Philox block per particle every two steps.
void advance_replica_1d(const PairwiseSeries& p, const StepPlan& plan, std::uint32_t replica, std::span<double> pos,
                        ReplicaWorkspace& ws) {
  const int N = plan.N;
  const auto n = static_cast<std::size_t>(N);
  ws.u0.resize(n);
  ws.u1.resize(n);
  ws.z0.resize(n);
  ws.z1.resize(n);
  const auto key = rng::key_from_seed(plan.seed);
  std::uint64_t cached = std::numeric_limits<std::uint64_t>::max();
  for (std::int64_t s = 0; s < plan.steps; ++s) {
    const auto step = static_cast<std::uint64_t>(plan.first_step + s);
    const std::uint64_t block = step >> 1;
    if (block != cached) {
      uniform_pairs_batch(key, static_cast<std::uint32_t>(block), 0, N, replica,
                          (static_cast<std::uint32_t>(rng::Purpose::dynamics) << 24) |
                              static_cast<std::uint32_t>((block >> 32) & 0xFFFFFFu),
                          ws.u0.data(), ws.u1.data());
      normal_quantile_batch(ws.u0.data(), ws.z0.data(), N);
      normal_quantile_batch(ws.u1.data(), ws.z1.data(), N);
      cached = block;
    }
    const double* z = (step & 1) ? ws.z1.data() : ws.z0.data();
    // The uniforms are no longer needed once this block's normals exist.
    step_1d(p, N, plan.dt, plan.include_self, pos.data(), z, ws, ws.u0.data(), ws.u1.data());
  }
}

// Any dimension; noise holds N * d standard normals.
void step_generic(const PairwiseSeries& p, int N, double dt, bool include_self, double* pos, const double* noise,
                  ReplicaWorkspace& ws) {
  const int d = p.dim;
  const auto nw = p.waves.size();
  const auto n = static_cast<std::size_t>(N);
  ws.cosv.resize(n * nw);
  ws.sinv.resize(n * nw);
  ws.moments_c.resize(nw);
  ws.moments_s.resize(nw);
  const bool pair_terms = include_self || N > 1;
  const double inv_count = include_self ? 1.0 / N : (N > 1 ? 1.0 / (N - 1) : 0.0);
  const double noise_scale = std::sqrt(2.0 * dt);

  for (std::size_t i = 0; i < n; ++i) {
    const double* v = pos + i * static_cast<std::size_t>(d);
    for (std::size_t w = 0; w < nw; ++w) {
      const auto& k = p.waves[w];
      double th = k[0] * v[0];
      for (int a = 1; a < d; ++a) th += k[static_cast<std::size_t>(a)] * v[a];
      sincos_2pi(th, ws.sinv[i * nw + w], ws.cosv[i * nw + w]);
    }
  }
  for (std::size_t w = 0; w < nw; ++w) {
    if (!p.pairwise[w]) continue;
    ws.moments_c[w] = moment_sum(ws.cosv.data() + w, nw, N);
    ws.moments_s[w] = moment_sum(ws.sinv.data() + w, nw, N);
  }

  for (std::size_t i = 0; i < n; ++i) {
    double drift[kMaxDim] = {0, 0, 0};
    double D[kMaxDim * kMaxDim] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    const int dd = d * d;
    if (pair_terms) {
      for (int a = 0; a < d; ++a) drift[a] = p.b0[static_cast<std::size_t>(a)];
      for (int e = 0; e < dd; ++e) D[e] = p.a20[static_cast<std::size_t>(e)];
    }
    for (int e = 0; e < dd; ++e) D[e] += p.a10[static_cast<std::size_t>(e)];
    for (std::size_t w = 0; w < nw; ++w) {
      const double ci = ws.cosv[i * nw + w];
      const double si = ws.sinv[i * nw + w];
      if (p.pairwise[w] && pair_terms) {
        double mc = ws.moments_c[w];
        double ms = ws.moments_s[w];
        if (!include_self) {
          mc -= ci;
          ms -= si;
        }
        mc *= inv_count;
        ms *= inv_count;
        const double P = ci * mc + si * ms;  // mean_j cos(2 pi k.(v_i - v_j))
        const double Q = si * mc - ci * ms;  // mean_j sin(2 pi k.(v_i - v_j))
        for (int a = 0; a < d; ++a) {
          drift[a] += p.b_cos[w * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] * P +
                      p.b_sin[w * static_cast<std::size_t>(d) + static_cast<std::size_t>(a)] * Q;
        }
        for (int e = 0; e < dd; ++e) {
          D[e] += p.a2_cos[w * static_cast<std::size_t>(dd) + static_cast<std::size_t>(e)] * P +
                  p.a2_sin[w * static_cast<std::size_t>(dd) + static_cast<std::size_t>(e)] * Q;
        }
      }
      for (int e = 0; e < dd; ++e) {
        D[e] += p.a1_cos[w * static_cast<std::size_t>(dd) + static_cast<std::size_t>(e)] * ci +
                p.a1_sin[w * static_cast<std::size_t>(dd) + static_cast<std::size_t>(e)] * si;
      }
    }

    const double* z = noise + i * static_cast<std::size_t>(d);
    double* v = pos + i * static_cast<std::size_t>(d);
    if (d == 1) {
      if (!(D[0] >= 0.0)) fail(ErrorKind::not_spd, "negative effective diffusion " + std::to_string(D[0]));
      v[0] = wrap(v[0] + dt * drift[0] + noise_scale * std::sqrt(D[0]) * z[0]);
    } else if (d == 2) {
      double S[4];
      const double sym = 0.5 * (D[1] + D[2]);
      if (!(D[0] * D[3] - sym * sym >= -kSpdFloor) || !(D[0] + D[3] >= 0.0)) {
        fail(ErrorKind::not_spd, "effective diffusion is not positive semidefinite");
      }
      sqrt_2x2(D[0], sym, D[3], S);
      const double x0 = v[0] + dt * drift[0] + noise_scale * (S[0] * z[0] + S[1] * z[1]);
      const double x1 = v[1] + dt * drift[1] + noise_scale * (S[2] * z[0] + S[3] * z[1]);
      v[0] = wrap(x0);
      v[1] = wrap(x1);
    } else {
      SymMatrix m(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) m(a, b) = 0.5 * (D[a * d + b] + D[b * d + a]);
      const SymMatrix S = sqrt_spd(m);
      double x[kMaxDim];
      for (int a = 0; a < d; ++a) {
        double acc = 0.0;
        for (int b = 0; b < d; ++b) acc += S(a, b) * z[b];
        x[a] = v[a] + dt * drift[a] + noise_scale * acc;
      }
      for (int a = 0; a < d; ++a) v[a] = wrap(x[a]);
    }
  }
}

}  // namespace

void fast_step(const PairwiseSeries& p, int N, double dt, bool include_self, std::span<double> positions,
               std::span<const double> noise, ReplicaWorkspace& ws) {
  const auto len = static_cast<std::size_t>(N * p.dim);
  require(positions.size() == len && noise.size() == len, ErrorKind::shape, "fast_step needs N * dim values");
  if (p.dim == 1) {
    ws.next.resize(2 * len);
    step_1d(p, N, dt, include_self, positions.data(), noise.data(), ws, ws.next.data(), ws.next.data() + len);
  } else {
    step_generic(p, N, dt, include_self, positions.data(), noise.data(), ws);
  }
}

void advance_replica_fast(const PairwiseSeries& p, const StepPlan& plan, std::uint32_t replica,
                          std::span<double> pos, ReplicaWorkspace& ws) {
  if (plan.dim == 1) {
    advance_replica_1d(p, plan, replica, pos, ws);
    return;
  }
  const int N = plan.N;
  const int d = plan.dim;
  const auto n = static_cast<std::size_t>(N);
  ws.cached_block.assign(n, std::numeric_limits<std::uint64_t>::max());
  ws.cached_normals.resize(2 * n);
  ws.noise.resize(n * static_cast<std::size_t>(d));
  for (std::int64_t s = 0; s < plan.steps; ++s) {
    const auto step = static_cast<std::uint64_t>(plan.first_step + s);
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < d; ++c) {
        const std::uint64_t idx = step * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(c);
        const std::uint64_t block = idx >> 1;
        if (ws.cached_block[i] != block) {
          const auto pair = dynamics_normal_pair(plan.seed, replica, static_cast<std::uint32_t>(i), block);
          ws.cached_normals[2 * i] = pair[0];
          ws.cached_normals[2 * i + 1] = pair[1];
          ws.cached_block[i] = block;
        }
        ws.noise[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] = ws.cached_normals[2 * i + (idx & 1)];
      }
    }
    step_generic(p, N, plan.dt, plan.include_self, pos.data(), ws.noise.data(), ws);
  }
}

void advance_replica_reference(const CoefficientSet& cs, const StepPlan& plan, std::uint32_t replica,
                               std::span<double> pos, ReplicaWorkspace& ws) {
  const auto n = static_cast<std::size_t>(plan.N * plan.dim);
  ws.noise.resize(n);
  for (std::int64_t s = 0; s < plan.steps; ++s) {
    const auto step = static_cast<std::uint64_t>(plan.first_step + s);
    for (int i = 0; i < plan.N; ++i) {
      for (int c = 0; c < plan.dim; ++c) {
        const std::uint64_t idx = step * static_cast<std::uint64_t>(plan.dim) + static_cast<std::uint64_t>(c);
        ws.noise[static_cast<std::size_t>(i * plan.dim + c)] =
            dynamics_normal_pair(plan.seed, replica, static_cast<std::uint32_t>(i), idx >> 1)[idx & 1];
      }
    }
    ws.next = em_step(pos, cs, plan.dt, ws.noise, plan.include_self);
    std::copy(ws.next.begin(), ws.next.end(), pos.begin());
  }
}

namespace {

template <class Advance>
void for_each_replica(std::span<double> positions, const StepPlan& plan, int workers, bool parallel, Advance&& advance) {
  const auto per = static_cast<std::size_t>(plan.N * plan.dim);
  require(per > 0 && positions.size() % per == 0, ErrorKind::shape, "positions must hold whole replicas");
  const auto R = static_cast<std::int64_t>(positions.size() / per);
  std::exception_ptr error;
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel num_threads(threads) if (parallel)
  {
    ReplicaWorkspace ws;
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t r = 0; r < R; ++r) {
      try {
        advance(static_cast<std::uint32_t>(r), positions.subspan(static_cast<std::size_t>(r) * per, per), ws);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

void advance_ensemble_parallel(const PairwiseSeries& series, const StepPlan& plan, std::span<double> positions,
                               int workers) {
  for_each_replica(positions, plan, workers, true, [&](std::uint32_t r, std::span<double> pos, ReplicaWorkspace& ws) {
    advance_replica_fast(series, plan, r, pos, ws);
  });
}

void advance_ensemble_serial(const PairwiseSeries& series, const StepPlan& plan, std::span<double> positions) {
  for_each_replica(positions, plan, 1, false, [&](std::uint32_t r, std::span<double> pos, ReplicaWorkspace& ws) {
    advance_replica_fast(series, plan, r, pos, ws);
  });
}

void advance_ensemble_reference(const CoefficientSet& cs, const StepPlan& plan, std::span<double> positions,
                                int workers) {
  for_each_replica(positions, plan, workers, true, [&](std::uint32_t r, std::span<double> pos, ReplicaWorkspace& ws) {
    advance_replica_reference(cs, plan, r, pos, ws);
  });
}

}  // namespace chaoslab::kernels
