#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "chaoslab/mean_field.hpp"
#include "chaoslab/particle_system.hpp"
#include "generators.hpp"

using namespace chaoslab;

namespace {

double tv(const GriddedDensity& a, const GriddedDensity& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s * a.mesh();
}

double entropy_vs_uniform(const GriddedDensity& r) {
  double s = 0.0;
  for (double v : r.values()) s += v * std::log(v);
  return s * r.mesh();
}

GriddedDensity cosine_exponential(int G, double kappa) {
  return cell_average_density(G, [kappa](double x) { return std::exp(kappa * std::cos(2 * M_PI * x)); });
}

// Non-interacting, space-dependent diffusion: the mean-field law has a
// non-uniform stationary state.
CoefficientSet variable_diffusion() {
  PresetParams p;
  p.alpha1 = 0.5;
  return build_preset("perturbed_constant", p);
}

}  // namespace

TEST_CASE("uniform density is stationary when the mean-field velocity is constant") {
  auto cs = build_preset("perturbed_constant", {});
  auto rho = GriddedDensity::uniform(1, 64);
  const double dt = cfl_step(cs, 64);
  for (int s = 0; s < 100; ++s) rho = fp_step(rho, cs, dt);
  for (double v : rho.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("heat mode decays at the analytic rate") {
  auto cs = build_preset("zero_interaction", {.a1 = 1.0});
  const int G = 128;
  auto rho0 = cell_average_density(G, [](double x) { return 1.0 + 0.5 * std::cos(2 * M_PI * x); });
  auto sol = solve_mean_field(rho0, cs, 0.05, {0.0, 0.05});
  auto amplitude = [G](const GriddedDensity& r) {
    double c = 0.0;
    for (int i = 0; i < G; ++i) c += r[static_cast<std::size_t>(i)] * std::cos(2 * M_PI * (i + 0.5) / G);
    return c;
  };
  const double ratio = amplitude(sol.densities[1]) / amplitude(sol.densities[0]);
  const double exact = std::exp(-4 * M_PI * M_PI * 0.05);
  CHECK(std::abs(ratio / exact - 1.0) < 0.02);
}

TEST_CASE("mass is conserved over 10^4 steps") {
  auto cs = variable_diffusion();
  const int G = 64;
  const double dt = cfl_step(cs, G);
  auto sol = solve_mean_field(cosine_exponential(G, 1.0), cs, 1e4 * dt, {1e4 * dt}, dt);
  CHECK(sol.steps == 10000);
  CHECK(std::abs(sol.densities.back().mass() - 1.0) < 1e-12);
}

TEST_CASE("uniform initial data under zero interaction") {
  auto cs = build_preset("zero_interaction", {.a1 = 1.0});
  auto sol = solve_mean_field(GriddedDensity::uniform(1, 32), cs, 0.1, {0.0, 0.05, 0.1});
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    CHECK(sol.grad_log_sup[i] == 0.0);
    for (double v : sol.densities[i].values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("heat flow dissipates relative entropy and C(t) is a running max") {
  auto cs = build_preset("zero_interaction", {.a1 = 1.0});
  std::vector<double> times;
  for (int i = 0; i <= 20; ++i) times.push_back(0.01 * i);
  auto sol = solve_mean_field(cosine_exponential(64, 1.0), cs, 0.2, times);
  for (std::size_t i = 1; i < times.size(); ++i) {
    CHECK(entropy_vs_uniform(sol.densities[i]) <= entropy_vs_uniform(sol.densities[i - 1]));
    CHECK(sol.grad_log_sup[i] >= sol.grad_log_sup[i - 1]);
  }
  // Central differences of log exp(cos 2 pi x) at the cell centres; cell
  // averaging changes this at O(h^2).
  const double h = 1.0 / 64;
  double expected = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double x = (i + 0.5) * h;
    expected = std::max(expected, std::abs(std::cos(2 * M_PI * (x + h)) - std::cos(2 * M_PI * (x - h))) / (2 * h));
  }
  CHECK(sol.grad_log_sup[0] == doctest::Approx(expected).epsilon(2e-3));
}

TEST_CASE("series and tabulated convolutions agree") {
  for (int trial = 0; trial < 10; ++trial) {
    PresetParams p;
    p.alpha1 = gen::uniform(-0.5, 0.5);
    p.c2 = gen::uniform(0.05, 0.3);
    p.eps_a = gen::uniform(-0.04, 0.04);
    p.beta0 = gen::uniform(-1, 1);
    auto cs = build_preset("perturbed_constant", p);
    auto rho = gen::smooth_density(1, 48, 0.8);
    const auto fast = face_coefficients(rho, cs);
    const auto direct = face_coefficients_direct(rho, cs);
    for (std::size_t i = 0; i < fast.D.size(); ++i) {
      CHECK(fast.D[i] == doctest::Approx(direct.D[i]).epsilon(1e-12));
      CHECK(std::abs(fast.U[i] - direct.U[i]) < 1e-12);
    }
  }
}

TEST_CASE("callable coefficients take the tabulated path") {
  // Same fields as the canonical preset, given only as callables.
  const auto ref = build_preset("perturbed_constant", {});
  auto scalar = [](auto f) {
    return [f](std::span<const double> x, std::span<double> out) { out[0] = f(x[0]); };
  };
  CoefficientSet cs(1, Field(1, 1, 1, scalar([](double x) { return 0.5 * std::sin(2 * M_PI * x); })),
                    Field(1, 1, 1, scalar([](double) { return 1.0; })),
                    Field(1, 1, 1, scalar([](double x) { return 0.1 + 0.02 * std::cos(2 * M_PI * x); })));
  auto rho = cosine_exponential(32, 1.0);
  const auto a = face_coefficients(rho, cs);
  const auto b = face_coefficients(rho, ref);
  for (std::size_t i = 0; i < a.D.size(); ++i) {
    CHECK(a.D[i] == doctest::Approx(b.D[i]).epsilon(1e-12));
    CHECK(std::abs(a.U[i] - b.U[i]) < 1e-9);  // finite-difference divergence of a2
  }
}

TEST_CASE("step-size and positivity errors") {
  auto cs = build_preset("zero_interaction", {.a1 = 1.0});
  auto rho = cosine_exponential(32, 1.0);
  try {
    fp_step(rho, cs, 10 * cfl_step(cs, 32));
    FAIL("CFL violation accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::step_size);
  }
  // Strong drift on a coarse grid: the central flux loses positivity.
  TrigField b(1, 1, 1);
  b.add_mode({1, 0, 0}, {0.0}, {200.0});
  TrigField a1(1, 1, 1);
  a1.set_constant({0.01});
  const TrigField zero(1, 1, 1);
  CoefficientSet sharp(1, Field(b), Field(a1), Field(zero));
  try {
    solve_mean_field(cosine_exponential(16, 2.0), sharp, 1.0, {1.0});
    FAIL("positivity loss not detected");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::positivity_loss);
  }
}

TEST_CASE("second-order self-convergence") {
  auto cs = variable_diffusion();
  std::vector<GriddedDensity> sols;
  for (int G : {128, 256, 1024}) sols.push_back(solve_mean_field(cosine_exponential(G, 1.0), cs, 0.5, {0.5}).densities[0]);
  const double e128 = tv(sols[0], coarsen(sols[2], 128));
  const double e256 = tv(sols[1], coarsen(sols[2], 256));
  CAPTURE(e128);
  CAPTURE(e256);
  CHECK(e128 / e256 >= 3.0);
  CHECK(e128 / e256 <= 5.0);
}

TEST_CASE("large-N particle marginal matches the mean-field law") {
  auto cs = variable_diffusion();
  const int N = 256, R = 400, G = 32;
  SimConfig cfg;
  cfg.N = N;
  cfg.R = R;
  cfg.T = 0.5;
  cfg.seed = 17;
  cfg.snapshot_times = {0.5};
  auto run = simulate_ensemble(cfg, cs, parse_initial_law("cosine_exponential", 1.0, 0.0, 0.0));
  std::vector<double> hist(G, 0.0);
  for (double v : run.snapshots[0]) hist[static_cast<std::size_t>(v * G)] += 1.0;
  const double n = double(N) * R;
  for (auto& c : hist) c *= G / n;
  const auto empirical = GriddedDensity::normalized(1, G, hist);
  const auto mf = coarsen(solve_mean_field(cosine_exponential(256, 1.0), cs, 0.5, {0.5}).densities[0], G);
  // Expected TV of a multinomial histogram around its mean, for i.i.d. draws.
  double se = 0.0;
  for (double p : mf.values()) se += std::sqrt(2.0 / M_PI * (p / G) * (1 - p / G) / n);
  se *= 0.5;
  CHECK(tv(empirical, mf) < 0.03 + 3 * se);
}

TEST_CASE("solution export") {
  auto cs = build_preset("zero_interaction", {.a1 = 1.0});
  auto sol = solve_mean_field(cosine_exponential(32, 1.0), cs, 0.02, {0.01, 0.02});
  const auto dir = std::filesystem::temp_directory_path() / "chaoslab_mf_test";
  std::filesystem::create_directories(dir);
  const auto table = save_mean_field(sol, dir / "mf");
  CHECK(std::filesystem::exists(table));
  const auto back = load_density(dir / "mf_t1.json");
  CHECK(std::vector<double>(back.values().begin(), back.values().end()) ==
        std::vector<double>(sol.densities[1].values().begin(), sol.densities[1].values().end()));
  std::filesystem::remove_all(dir);
}
