#pragma once

// Experiment configuration (strict JSON), the scaling sweep of Monte Carlo
// relative entropies against the mean-field product law, and power-law
// slope fits of the sweep.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chaoslab/coefficients.hpp"
#include "chaoslab/divergence_metrics.hpp"
#include "chaoslab/particle_system.hpp"

namespace chaoslab {

inline constexpr double kDefaultComputeBudget = 2e11;

struct OracleSettings {
  int N = 2;
  int G = 32;
  double dt_snap = 0.01;
  double T = 0.5;
  bool operator==(const OracleSettings&) const = default;
};

struct HierarchySettings {
  std::vector<int> N = {16, 32, 64};
  double beta = 2.0;
  double C0 = 1.0, M1 = 0.0, M2 = 1.0, M3 = 1.0;
  double T = 1.0;
  int steps = 4096;
  std::string supplier = "zero";  // zero | proportional
  double lambda = 0.0;
  bool operator==(const HierarchySettings&) const = default;
};

struct ExperimentConfig {
  std::string preset;
  PresetParams params;
  int dim = 1;
  std::string law = "cosine_exponential";
  double kappa = 1.0, mode = 0.0, separation = 0.0;
  std::vector<int> N;
  std::vector<int> k;
  std::vector<double> times;
  int R = 100000;
  double dt = 1e-4;
  int G = 64;
  int mf_resolution = 256;
  std::uint64_t seed = 1;
  double alpha = 0.5;
  int bootstrap = 200;
  std::string tuples = "all_disjoint";
  bool include_self = true;
  std::string output = "out";
  double budget = kDefaultComputeBudget;
  OracleSettings oracle;
  HierarchySettings hierarchy;

  bool operator==(const ExperimentConfig& o) const;
  // Canonical JSON with every field present.
  std::string to_json() const;
};

// Throws Error(configuration) with the JSON path of the offending field on
// unknown keys, wrong types and failed validation (k <= min N per cell, G
// even and dividing mf_resolution, positive sizes).
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

CoefficientSet build_coefficients(const ExperimentConfig& cfg);
InitialLaw build_law(const ExperimentConfig& cfg);
HistogramOptions histogram_options(const ExperimentConfig& cfg);

// Predicted cost, itemized. Units are particle steps for simulations and
// cell updates for grid solvers.
struct CostItem {
  std::string what;
  double cost = 0.0;
  double bytes = 0.0;
};
struct CostEstimate {
  std::vector<CostItem> items;
  double total() const;
  std::string describe() const;
};
CostEstimate estimate_sweep_cost(const ExperimentConfig& cfg);
CostEstimate estimate_oracle_cost(const ExperimentConfig& cfg);
CostEstimate estimate_hierarchy_cost(const ExperimentConfig& cfg);

// CHAOSLAB_BUDGET when set, otherwise the config's budget.
double effective_budget(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(std::string_view text) noexcept;

struct ScalingRow {
  std::string key;  // 16 hex digits of FNV-1a over the cell's inputs
  std::string preset;
  std::string preset_hash;
  std::string law;
  int N = 0, k = 0;
  double t = 0.0;
  int R = 0;
  double dt = 0.0;
  int G = 0, mf_resolution = 0;
  double alpha = 0.0;
  int bootstrap = 0;
  std::uint64_t seed = 0;
  double H = 0, se = 0, H_debiased = 0, bias_bound = 0, H_half = 0, bias_proxy = 0, chi2 = 0, tv = 0;
  std::int64_t samples = 0;
  std::string status = "ok";  // ok | failed
  std::string message;

  std::string to_csv() const;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  int failed = 0;
  int skipped = 0;  // rows already present on resume
};

std::string scaling_csv_header();
std::vector<ScalingRow> read_scaling_csv(const std::filesystem::path& path);

// Key of the sweep cell (N, k, t) under this config.
std::string cell_key(const ExperimentConfig& cfg, int N, int k, double t);

// For every N: simulate once to all times, then estimate every (k, t) cell.
// Rows are appended to csv_path as soon as an N completes; rows whose key is
// already in the file are skipped (a whole N is skipped when all its rows
// exist). Failed cells become rows with status "failed".
ScalingResult run_scaling_sweep(const ExperimentConfig& cfg, const std::filesystem::path& csv_path,
                                const std::function<void(const std::string&)>& log = {});

enum class SlopeAxis { N_at_fixed_k, k_at_fixed_N };

struct SlopeFit {
  double slope = 0.0, stderr_ = 0.0, intercept = 0.0;
  std::vector<double> used;      // axis values in the fit
  std::vector<double> excluded;  // noise-dominated axis values
  std::string to_json() const;
};

// Weighted least squares of log H_debiased on log(axis) for the rows at
// `fixed` (k or N) and time t. Rows with H_debiased <= 3 se are excluded and
// reported; weights are (H / se)^2, uniform if any se is zero. Throws
// insufficient_signal with fewer than 3 usable points.
SlopeFit fit_scaling_slope(const std::vector<ScalingRow>& rows, SlopeAxis axis, int fixed, double t);

}  // namespace chaoslab
