#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "chaoslab/divergence_metrics.hpp"
#include "generators.hpp"

using namespace chaoslab;

namespace {

// Point samples of exp(kappa cos 2 pi x), normalized.
GriddedDensity von_mises_points(int G, double kappa) {
  auto f = sample_on_grid(G, [kappa](double x) { return std::exp(kappa * std::cos(2 * M_PI * x)); });
  return GriddedDensity::normalized(1, G, f.values);
}

EnsembleRun iid_run(int N, int R, std::uint64_t seed, double kappa = 1.0) {
  return sample_initial(parse_initial_law("cosine_exponential", kappa, 0.0, 0.0), N, R, seed);
}

MeanFieldSolution frozen_mf(const GriddedDensity& mu, double t = 0.0) {
  MeanFieldSolution mf;
  mf.resolution = mu.resolution();
  mf.times = {t};
  mf.densities = {mu};
  mf.grad_log_sup = {0.0};
  return mf;
}

}  // namespace

TEST_CASE("identical densities have zero divergence") {
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = gen::smooth_density(trial % 3 + 1, 16);
    const auto r = divergence_grid(p, p);
    CHECK(r.H == 0.0);
    CHECK(r.chi2 == 0.0);
    CHECK(r.tv == 0.0);
    CHECK(fisher_grid(p, p) == 0.0);
  }
}

TEST_CASE("relative entropy of a von Mises law against uniform") {
  // H = I1(1)/I0(1) - log I0(1) for p = exp(cos)/I0(1).
  const double i0 = std::cyl_bessel_i(0.0, 1.0), i1 = std::cyl_bessel_i(1.0, 1.0);
  const double exact = i1 / i0 - std::log(i0);
  const auto r = divergence_grid(von_mises_points(256, 1.0), GriddedDensity::uniform(1, 256));
  CHECK(std::abs(r.H - exact) < 1e-6);
  // chi2 = I0(2)/I0(1)^2 - 1.
  CHECK(r.chi2 == doctest::Approx(std::cyl_bessel_i(0.0, 2.0) / (i0 * i0) - 1.0).epsilon(1e-6));
}

TEST_CASE("Fisher information of a von Mises law against uniform") {
  // int p (2 pi sin 2 pi x)^2 = 2 pi^2 (1 - I2(1)/I0(1)).
  const double exact = 2 * M_PI * M_PI * (1.0 - std::cyl_bessel_i(2.0, 1.0) / std::cyl_bessel_i(0.0, 1.0));
  const double f = fisher_grid(von_mises_points(256, 1.0), GriddedDensity::uniform(1, 256));
  CHECK(f == doctest::Approx(exact).epsilon(0.01));
}

TEST_CASE("Fisher information is additive over independent axes") {
  for (int trial = 0; trial < 10; ++trial) {
    const int G = 24;
    const auto p1 = gen::smooth_density(1, G), p2 = gen::smooth_density(1, G);
    const auto q1 = gen::smooth_density(1, G), q2 = gen::smooth_density(1, G);
    std::vector<double> p(G * G), q(G * G);
    for (int i = 0; i < G; ++i)
      for (int j = 0; j < G; ++j) {
        p[static_cast<std::size_t>(i * G + j)] = p1[static_cast<std::size_t>(i)] * p2[static_cast<std::size_t>(j)];
        q[static_cast<std::size_t>(i * G + j)] = q1[static_cast<std::size_t>(i)] * q2[static_cast<std::size_t>(j)];
      }
    const double joint = fisher_grid(GriddedDensity(2, G, p), GriddedDensity(2, G, q));
    CHECK(joint == doctest::Approx(fisher_grid(p1, q1) + fisher_grid(p2, q2)).epsilon(1e-10));
  }
}

TEST_CASE("Pinsker and the log(1 + chi2) ordering on random pairs") {
  for (int trial = 0; trial < 1000; ++trial) {
    const int axes = gen::integer(1, 2);
    const int G = axes == 1 ? gen::integer(4, 64) : gen::integer(4, 12);
    const auto p = trial % 2 ? gen::rough_density(axes, G) : gen::smooth_density(axes, G, 1.5);
    const auto q = trial % 3 ? gen::rough_density(axes, G) : gen::smooth_density(axes, G, 1.5);
    const auto r = divergence_grid(p, q);
    CHECK(r.H >= 0.0);
    CHECK(r.chi2 >= 0.0);
    CHECK(r.tv >= 0.0);
    CHECK(r.tv <= 1.0);
    CHECK(r.tv <= std::sqrt(r.H / 2) + 1e-10);
    CHECK(r.H <= std::log1p(r.chi2) + 1e-10);
  }
}

TEST_CASE("joint convexity and data processing on random instances") {
  for (int trial = 0; trial < 200; ++trial) {
    const int G = gen::integer(4, 10);
    const int axes = gen::integer(2, 3);
    const auto p1 = gen::rough_density(axes, G), p2 = gen::smooth_density(axes, G);
    const auto q1 = gen::smooth_density(axes, G), q2 = gen::rough_density(axes, G);
    const double lam = gen::uniform(0, 1);
    std::vector<double> pm(p1.size()), qm(p1.size());
    for (std::size_t i = 0; i < pm.size(); ++i) {
      pm[i] = lam * p1[i] + (1 - lam) * p2[i];
      qm[i] = lam * q1[i] + (1 - lam) * q2[i];
    }
    const double mixed = divergence_grid(GriddedDensity(axes, G, pm), GriddedDensity(axes, G, qm)).H;
    CHECK(mixed <= lam * divergence_grid(p1, q1).H + (1 - lam) * divergence_grid(p2, q2).H + 1e-10);
    for (int keep = 1; keep < axes; ++keep)
      CHECK(divergence_grid(marginalize(p1, keep), marginalize(q1, keep)).H <= divergence_grid(p1, q1).H + 1e-10);
  }
}

TEST_CASE("absolute continuity and positivity errors") {
  std::vector<double> q(8, 8.0 / 7.0);
  q[3] = 0.0;
  try {
    divergence_grid(GriddedDensity::uniform(1, 8), GriddedDensity(1, 8, q));
    FAIL("vanishing reference accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::absolute_continuity);
  }
  // p = 0 where q = 0 is fine.
  CHECK(divergence_grid(GriddedDensity(1, 8, q), GriddedDensity(1, 8, q)).H == 0.0);
  try {
    fisher_grid(GriddedDensity(1, 8, q), GriddedDensity::uniform(1, 8));
    FAIL("zero cell accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::positivity_loss);
  }
}

TEST_CASE("uniform sample histogram counts concentrate") {
  const int R = 20000, G = 32;
  const auto run = sample_initial(parse_initial_law("uniform", 0.0, 0.0, 0.0), 1, R, 3);
  HistogramOptions opt;
  opt.alpha = 0.0;
  const auto hist = mc_marginal_histogram(run, 0.0, 1, G, opt);
  const double h = 1.0 / G;
  for (double v : hist.values()) CHECK(std::abs(v * h * R - R * h) <= 4 * std::sqrt(R * h));
}

TEST_CASE("histogram is invariant under replica reordering") {
  const auto run = iid_run(4, 500, 9);
  EnsembleRun shuffled = run;
  std::vector<int> order(500);
  for (int i = 0; i < 500; ++i) order[static_cast<std::size_t>(i)] = (i * 37) % 500;
  for (int r = 0; r < 500; ++r) {
    const auto src = run.replica(0, order[static_cast<std::size_t>(r)]);
    std::copy(src.begin(), src.end(), shuffled.snapshots[0].begin() + r * 4);
  }
  for (int k : {1, 2}) {
    const auto a = mc_marginal_histogram(run, 0.0, k, 16);
    const auto b = mc_marginal_histogram(shuffled, 0.0, k, 16);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  }
}

TEST_CASE("tuple modes") {
  const auto run = iid_run(6, 1000, 4);
  const auto mf = frozen_mf(cell_average_density(32, [](double x) { return std::exp(std::cos(2 * M_PI * x)); }));
  HistogramOptions first;
  first.tuples = TupleMode::first;
  first.bootstrap = 20;
  HistogramOptions all = first;
  all.tuples = TupleMode::all_disjoint;
  CHECK(mc_entropy_estimate(run, 0.0, 1, mf, 32, first).samples == 1000);
  CHECK(mc_entropy_estimate(run, 0.0, 1, mf, 32, all).samples == 6000);
  CHECK(mc_entropy_estimate(run, 0.0, 2, mf, 8, all).samples == 3000);
  CHECK(mc_entropy_estimate(run, 0.0, 4, mf, 4, all).samples == 1000);
}

TEST_CASE("independent samples: estimate below the reported bias bound, shrinking in R") {
  const int G = 32;
  const auto mf = frozen_mf(cell_average_density(256, [](double x) { return std::exp(std::cos(2 * M_PI * x)); }));
  for (int k : {1, 2}) {
    double last_bound = 1e300, last_proxy = 1e300;
    for (int R : {10000, 100000}) {
      const auto run = iid_run(2, R, 11 + R);
      const int g = k == 1 ? G : 16;
      const auto e = mc_entropy_estimate(run, 0.0, k, mf, g);
      CAPTURE(k);
      CAPTURE(R);
      CHECK(e.H <= e.bias_bound);
      CHECK(e.bias_bound < last_bound);
      CHECK(std::abs(e.bias_proxy) < last_proxy);
      last_bound = e.bias_bound;
      last_proxy = std::abs(e.bias_proxy);
    }
  }
}

TEST_CASE("doubling R halves the null bootstrap error") {
  // Under independence the plug-in estimate is chi^2 / (2n): its spread scales as 1/n.
  const auto mf = frozen_mf(cell_average_density(64, [](double x) { return std::exp(std::cos(2 * M_PI * x)); }));
  const auto run = iid_run(1, 40000, 21);
  EnsembleRun half = run;
  half.config.R = 20000;
  half.snapshots[0].resize(20000);
  const double se_full = mc_entropy_estimate(run, 0.0, 1, mf, 32).se;
  const double se_half = mc_entropy_estimate(half, 0.0, 1, mf, 32).se;
  CHECK(se_full / se_half == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("bootstrap is reproducible") {
  const auto mf = frozen_mf(GriddedDensity::uniform(1, 16));
  const auto run = iid_run(2, 3000, 5);
  const auto a = mc_entropy_estimate(run, 0.0, 1, mf, 16);
  const auto b = mc_entropy_estimate(run, 0.0, 1, mf, 16);
  CHECK(a.se == b.se);
  CHECK(a.H_debiased == b.H_debiased);
}

TEST_CASE("k = 1 histogram under zero interaction matches the mean-field law") {
  auto cs = build_preset("zero_interaction", {.a1 = 1.0});
  SimConfig cfg;
  cfg.N = 2;
  cfg.R = 50000;
  cfg.T = 0.1;
  cfg.dt = 1e-4;
  cfg.seed = 8;
  cfg.snapshot_times = {0.1};
  const auto law = parse_initial_law("cosine_exponential", 1.0, 0.0, 0.0);
  const auto run = simulate_ensemble(cfg, cs, law);
  const auto mf = solve_mean_field(cell_average_density(256, [](double x) { return std::exp(std::cos(2 * M_PI * x)); }),
                                   cs, 0.1, {0.1});
  const auto e = mc_entropy_estimate(run, 0.1, 1, mf, 64);
  // R N = 10^5 samples.
  CHECK(e.tv <= 0.03 + 3 * std::sqrt(2 * e.se));
  CHECK(e.H <= e.bias_bound);
  const auto json = e.to_json();
  CHECK(json.find("\"alpha\":0.5") != std::string::npos);
}
