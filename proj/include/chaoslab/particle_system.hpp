#pragma once

// N exchangeable particles on T^d,
//   dV^i = (1/N) sum_j b(V^i - V^j) dt + sqrt(2) (a1(V^i) + (1/N) sum_j a2(V^i - V^j))^(1/2) dB^i,
// simulated across R independent replicas with explicit Euler-Maruyama.
// Positions are stored [replica][particle][dim], row-major.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/coefficients.hpp"

namespace chaoslab {

struct InitialLaw {
  enum class Kind { uniform, cosine_exponential, exchangeable_mixture };
  Kind kind = Kind::uniform;
  // Per-coordinate density proportional to exp(kappa cos(2 pi (x - mode))).
  double kappa = 0.0;
  double mode = 0.0;
  // exchangeable_mixture: each replica picks one of the two product laws with
  // modes mode +- separation / sqrt(N) (probability 1/2 each) and draws all N
  // particles from it. The 1/sqrt(N) spacing keeps H(mu_0^k | mu_0^{x k}) of
  // order k^2 / N^2.
  double separation = 0.0;

  std::string name() const;
};

InitialLaw parse_initial_law(const std::string& name, double kappa, double mode, double separation);

// Normalized per-coordinate density of the product component, on [0,1).
double initial_density(const InitialLaw& law, double x, double mode_shift = 0.0);

struct SimConfig {
  int N = 2;
  int dim = 1;
  double dt = 1e-4;
  double T = 0.0;
  int R = 1;
  std::uint64_t seed = 0;
  std::vector<double> snapshot_times;
  bool include_self = true;
  // Cap on R * N * steps.
  double budget = 2e11;
  // 0 = OpenMP default.
  int workers = 0;
};

struct EnsembleRun {
  SimConfig config;
  InitialLaw law;
  std::vector<double> times;
  std::vector<std::int64_t> steps;
  std::vector<std::vector<double>> snapshots;  // per time: R * N * dim
  std::vector<std::string> warnings;
  std::string coefficients;  // preset description

  int N() const noexcept { return config.N; }
  int R() const noexcept { return config.R; }
  int dim() const noexcept { return config.dim; }
  std::size_t snapshot_index(double time) const;
  std::span<const double> replica(std::size_t snapshot, int r) const;
};

// Positions at t = 0 for all replicas; uses the counter stream
// (seed, replica, particle, purpose = initial).
EnsembleRun sample_initial(const InitialLaw& law, int N, int R, std::uint64_t seed, int dim = 1);

// One explicit Euler-Maruyama step with coefficients frozen at the start;
// direct O(N^2) pairwise sums. noise is N x d standard normals.
std::vector<double> em_step(std::span<const double> positions, const CoefficientSet& cs, double dt,
                            std::span<const double> noise, bool include_self = true);

enum class Kernel { automatic, fast, reference };

// Marches all replicas to the snapshot times. Noise for replica r, particle i
// is the normal sequence indexed by step * d + component in the counter stream
// (seed, replica, particle, purpose = dynamics), so output is bit-identical for
// any worker count. `fast` needs trigonometric fields; `reference` calls em_step.
EnsembleRun simulate_ensemble(const SimConfig& config, const CoefficientSet& cs, const InitialLaw& law,
                              Kernel kernel = Kernel::automatic);

// Standard normal number n of the dynamics stream of (replica, particle).
double dynamics_normal(std::uint64_t seed, std::uint32_t replica, std::uint32_t particle, std::uint64_t n) noexcept;

// Snapshot export: `<stem>.bin` with little-endian float64 [replica][particle][dim]
// and `<stem>.json` sidecar. Returns the sidecar path.
std::filesystem::path write_snapshot(const EnsembleRun& run, std::size_t snapshot, const std::filesystem::path& stem);
std::vector<double> read_snapshot(const std::filesystem::path& sidecar, SimConfig* config = nullptr,
                                  double* time = nullptr);

const char* build_version() noexcept;

}  // namespace chaoslab
