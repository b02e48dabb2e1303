// Timings of the OpenMP kernels against their serial and reference
// counterparts, with an agreement check for each pair.
//
//   bench_kernels [--replicas R] [--steps S] [--repeat K] [--threads T]

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "chaoslab/bbgky_oracle.hpp"
#include "chaoslab/kernels/ensemble.hpp"
#include "chaoslab/mean_field.hpp"
#include "chaoslab/particle_system.hpp"

using namespace chaoslab;

namespace {

// Best wall time of `repeat` runs, in seconds.
double best_of(int repeat, const std::function<void()>& fn) {
  double best = INFINITY;
  for (int i = 0; i < repeat; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = std::abs(a[i] - b[i]);
    m = std::max(m, std::min(d, 1.0 - d));  // positions live on the torus
  }
  return m;
}

void bench_ensemble(const CoefficientSet& cs, int N, int R, int steps, int repeat, int threads) {
  const auto law = parse_initial_law("cosine_exponential", 1.0, 0.0, 0.0);
  const auto init = sample_initial(law, N, R, 42).snapshots[0];
  const auto series = kernels::PairwiseSeries::compile(cs);
  kernels::StepPlan plan;
  plan.N = N;
  plan.dt = 1e-4;
  plan.seed = 9;
  plan.steps = steps;

  std::vector<double> par, ser, ref;
  const double t_par = best_of(repeat, [&] {
    par = init;
    kernels::advance_ensemble_parallel(series, plan, par, threads);
  });
  const double t_ser = best_of(repeat, [&] {
    ser = init;
    kernels::advance_ensemble_serial(series, plan, ser);
  });
  const double t_ref = best_of(repeat, [&] {
    ref = init;
    kernels::advance_ensemble_reference(cs, plan, ref, threads);
  });
  const double work = double(N) * R * steps * 1e-9;
  std::printf("ensemble  N=%-3d R=%-6d steps=%-4d  parallel %7.2f ns  serial %7.2f ns  reference %8.2f ns"
              "  (per particle-step)  parallel==serial: %s  |fast-reference| %.1e\n",
              N, R, steps, t_par / work, t_ser / work, t_ref / work, par == ser ? "bitwise" : "NO",
              max_abs_diff(par, ref));
}

void bench_joint(const CoefficientSet& cs, int N, int G, int repeat, int threads) {
  const auto law = parse_initial_law("cosine_exponential", 1.0, 0.0, 0.0);
  const auto init = initial_joint_density(law, N, G);
  JointSolution one, many;
  omp_set_num_threads(1);
  const double t1 = best_of(repeat, [&] { one = solve_joint_fp(N, cs, init, 0.05, {0.05}); });
  omp_set_num_threads(threads);
  const double tn = best_of(repeat, [&] { many = solve_joint_fp(N, cs, init, 0.05, {0.05}); });
  double diff = 0.0;
  for (std::size_t i = 0; i < one.densities[0].size(); ++i)
    diff = std::max(diff, std::abs(one.densities[0][i] - many.densities[0][i]));
  std::printf("joint FP  N=%d G=%-3d steps=%-5lld  1 thread %8.3f s  %d threads %8.3f s  max |diff| %.1e\n", N, G,
              static_cast<long long>(one.steps), t1, threads, tn, diff);
}

void bench_faces(const CoefficientSet& cs, int G, int repeat) {
  const auto law = parse_initial_law("cosine_exponential", 1.0, 0.0, 0.0);
  const auto rho = cell_average_density(G, [&](double x) { return initial_density(law, x); });
  FaceCoefficients fast, direct;
  const int inner = std::max(1, 65536 / G);
  const double tf = best_of(repeat, [&] {
    for (int i = 0; i < inner; ++i) fast = face_coefficients(rho, cs);
  });
  const double td = best_of(repeat, [&] {
    for (int i = 0; i < std::max(1, inner / 64); ++i) direct = face_coefficients_direct(rho, cs);
  });
  double diff = 0.0;
  for (std::size_t i = 0; i < fast.D.size(); ++i)
    diff = std::max({diff, std::abs(fast.D[i] - direct.D[i]), std::abs(fast.U[i] - direct.U[i])});
  std::printf("faces     G=%-5d  moments %9.2f us  tabulated convolution %9.2f us  max |diff| %.1e\n", G,
              tf / inner * 1e6, td / std::max(1, inner / 64) * 1e6, diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel benchmarks"};
  int R = 4000, steps = 200, repeat = 3, threads = omp_get_max_threads();
  app.add_option("--replicas", R, "replicas per ensemble run")->check(CLI::PositiveNumber);
  app.add_option("--steps", steps, "Euler-Maruyama steps per run")->check(CLI::PositiveNumber);
  app.add_option("--repeat", repeat, "timed repetitions (best is reported)")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "threads for the parallel variants")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  PresetParams p;
  p.alpha1 = 0.9;
  p.beta0 = 4.0;
  const auto cs = build_preset("perturbed_constant", p);
  std::printf("threads available: %d, used: %d\n", omp_get_max_threads(), threads);

  for (int N : {2, 8, 64}) bench_ensemble(cs, N, N >= 64 ? R / 8 : R, steps, repeat, threads);
  for (auto [N, G] : {std::pair{2, 128}, std::pair{3, 32}}) bench_joint(cs, N, G, repeat, threads);
  for (int G : {64, 256, 1024}) bench_faces(cs, G, repeat);
  return 0;
}
