#include "chaoslab/particle_system.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <memory>
#include <mutex>
#include <numbers>

#include <json.hpp>

#include "chaoslab/kernels/ensemble.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/torus_grid.hpp"

#ifndef CHAOSLAB_GIT_DESCRIBE
#define CHAOSLAB_GIT_DESCRIBE "unknown"
#endif

namespace chaoslab {

const char* build_version() noexcept { return CHAOSLAB_GIT_DESCRIBE; }

std::string InitialLaw::name() const {
  switch (kind) {
    case Kind::uniform: return "uniform";
    case Kind::cosine_exponential: return "cosine_exponential";
    case Kind::exchangeable_mixture: return "exchangeable_mixture";
  }
  return "unknown";
}

InitialLaw parse_initial_law(const std::string& name, double kappa, double mode, double separation) {
  InitialLaw law;
  if (name == "uniform") {
    law.kind = InitialLaw::Kind::uniform;
  } else if (name == "cosine_exponential") {
    law.kind = InitialLaw::Kind::cosine_exponential;
  } else if (name == "exchangeable_mixture") {
    law.kind = InitialLaw::Kind::exchangeable_mixture;
  } else {
    fail(ErrorKind::configuration, "unknown initial law '" + name + "'");
  }
  require(std::isfinite(kappa) && kappa >= 0.0, ErrorKind::configuration, "initial law needs kappa >= 0");
  require(std::isfinite(mode) && std::isfinite(separation), ErrorKind::configuration, "initial law parameters must be finite");
  law.kappa = kappa;
  law.mode = mode;
  law.separation = separation;
  return law;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Normalizing constant of exp(kappa cos(2 pi x)) on [0,1) is I0(kappa).
double von_mises_norm(double kappa) { return std::cyl_bessel_i(0.0, kappa); }

// Inverse-CDF table of the density proportional to exp(kappa cos(2 pi x)).
class InverseCdf {
 public:
  static constexpr int kNodes = 65536;

  explicit InverseCdf(double kappa) : cdf_(kNodes + 1, 0.0) {
    static constexpr double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                     0.9061798459386640};
    static constexpr double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                     0.4786286704993665, 0.2369268850561891};
    const double h = 1.0 / kNodes;
    double acc = 0.0;
    for (int i = 0; i < kNodes; ++i) {
      double cell = 0.0;
      for (int q = 0; q < 5; ++q) cell += gw[q] * std::exp(kappa * std::cos(kTwoPi * (i + 0.5 + 0.5 * gx[q]) * h));
      acc += 0.5 * h * cell;
      cdf_[static_cast<std::size_t>(i) + 1] = acc;
    }
    for (double& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }

  double operator()(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cdf_.begin() - 1, 0, kNodes - 1));
    const double lo = cdf_[i], hi = cdf_[i + 1];
    const double frac = hi > lo ? (u - lo) / (hi - lo) : 0.5;
    return (static_cast<double>(i) + frac) / kNodes;
  }

 private:
  std::vector<double> cdf_;
};

const InverseCdf& inverse_cdf(double kappa) {
  static std::mutex mu;
  static std::map<double, std::unique_ptr<InverseCdf>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[kappa];
  if (!slot) slot = std::make_unique<InverseCdf>(kappa);
  return *slot;
}

std::int64_t snap_steps(double t, double dt) { return static_cast<std::int64_t>(std::llround(t / dt)); }

}  // namespace

double initial_density(const InitialLaw& law, double x, double mode_shift) {
  if (law.kind == InitialLaw::Kind::uniform) return 1.0;
  return std::exp(law.kappa * std::cos(kTwoPi * (x - law.mode - mode_shift))) / von_mises_norm(law.kappa);
}

std::size_t EnsembleRun::snapshot_index(double time) const {
  for (std::size_t s = 0; s < times.size(); ++s) {
    if (std::abs(times[s] - time) <= 1e-9 * std::max(1.0, std::abs(time))) return s;
  }
  fail(ErrorKind::invalid_input, "no snapshot at t = " + std::to_string(time));
}

std::span<const double> EnsembleRun::replica(std::size_t snapshot, int r) const {
  const auto per = static_cast<std::size_t>(N() * dim());
  return std::span<const double>(snapshots.at(snapshot)).subspan(static_cast<std::size_t>(r) * per, per);
}

EnsembleRun sample_initial(const InitialLaw& law, int N, int R, std::uint64_t seed, int dim) {
  require(N >= 1 && R >= 1, ErrorKind::configuration, "need N >= 1 and R >= 1");
  require(dim >= 1 && dim <= kMaxDim, ErrorKind::configuration, "dimension must be 1, 2 or 3");
  require(law.kappa >= 0.0, ErrorKind::configuration, "kappa must be >= 0");
  EnsembleRun run;
  run.law = law;
  run.config.N = N;
  run.config.R = R;
  run.config.dim = dim;
  run.config.seed = seed;
  run.times = {0.0};
  run.steps = {0};
  const auto per = static_cast<std::size_t>(N * dim);
  std::vector<double> pos(per * static_cast<std::size_t>(R));
  const InverseCdf* table = law.kind == InitialLaw::Kind::uniform ? nullptr : &inverse_cdf(law.kappa);
  const auto key = rng::key_from_seed(seed);
  const double spread = law.separation / std::sqrt(static_cast<double>(N));

#pragma omp parallel for schedule(static)
  for (int r = 0; r < R; ++r) {
    double shift = law.mode;
    if (law.kind == InitialLaw::Kind::exchangeable_mixture) {
      const auto u = rng::uniform2(key, rng::make_counter(0, 0, static_cast<std::uint32_t>(r), rng::Purpose::mixture));
      shift += u[0] < 0.5 ? spread : -spread;
    }
    for (int i = 0; i < N; ++i) {
      for (int c = 0; c < dim; c += 2) {
        const auto u = rng::uniform2(key, rng::make_counter(static_cast<std::uint32_t>(c / 2), static_cast<std::uint32_t>(i),
                                                            static_cast<std::uint32_t>(r), rng::Purpose::initial));
        for (int lane = 0; lane < 2 && c + lane < dim; ++lane) {
          const double x = table ? wrap((*table)(u[static_cast<std::size_t>(lane)]) + shift) : u[static_cast<std::size_t>(lane)];
          pos[static_cast<std::size_t>(r) * per + static_cast<std::size_t>(i * dim + c + lane)] = x;
        }
      }
    }
  }
  run.snapshots.push_back(std::move(pos));
  return run;
}

std::vector<double> em_step(std::span<const double> positions, const CoefficientSet& cs, double dt,
                            std::span<const double> noise, bool include_self) {
  const int d = cs.dim();
  require(dt > 0.0, ErrorKind::invalid_input, "dt must be positive");
  require(positions.size() % static_cast<std::size_t>(d) == 0 && noise.size() == positions.size(), ErrorKind::shape,
          "positions and noise must both be N x d");
  const int N = static_cast<int>(positions.size() / static_cast<std::size_t>(d));
  std::vector<double> out(positions.size());
  std::vector<double> bval(static_cast<std::size_t>(d));
  std::array<double, kMaxDim> diff{};
  const double scale = std::sqrt(2.0 * dt);
  for (int i = 0; i < N; ++i) {
    SmallVector drift = SmallVector::Zero(d);
    int terms = 0;
    for (int j = 0; j < N; ++j) {
      if (j == i && !include_self) continue;
      for (int a = 0; a < d; ++a) {
        diff[static_cast<std::size_t>(a)] =
            wrap(positions[static_cast<std::size_t>(i * d + a)] - positions[static_cast<std::size_t>(j * d + a)]);
      }
      cs.b().evaluate(std::span<const double>(diff.data(), static_cast<std::size_t>(d)), bval);
      for (int a = 0; a < d; ++a) drift(a) += bval[static_cast<std::size_t>(a)];
      ++terms;
    }
    if (terms > 0) drift /= static_cast<double>(terms);
    const SymMatrix S = sqrt_spd(effective_diffusion(cs, positions, i, include_self));
    for (int a = 0; a < d; ++a) {
      double kick = 0.0;
      for (int b = 0; b < d; ++b) kick += S(a, b) * noise[static_cast<std::size_t>(i * d + b)];
      out[static_cast<std::size_t>(i * d + a)] = wrap(positions[static_cast<std::size_t>(i * d + a)] + dt * drift(a) + scale * kick);
    }
  }
  return out;
}

double dynamics_normal(std::uint64_t seed, std::uint32_t replica, std::uint32_t particle, std::uint64_t n) noexcept {
  return kernels::dynamics_normal_pair(seed, replica, particle, n >> 1)[n & 1];
}

EnsembleRun simulate_ensemble(const SimConfig& config, const CoefficientSet& cs, const InitialLaw& law, Kernel kernel) {
  require(config.dt > 0.0 && std::isfinite(config.dt), ErrorKind::configuration, "dt must be positive");
  require(config.T >= 0.0, ErrorKind::configuration, "horizon T must be >= 0");
  require(config.dim == cs.dim(), ErrorKind::configuration, "simulation dimension differs from the coefficient set");
  require(cs.certificate().has_value() && cs.lambda1() > 0.0, ErrorKind::configuration,
          "coefficients must be certified before simulation");
  const std::int64_t total = snap_steps(config.T, config.dt);
  const double cost = static_cast<double>(config.R) * config.N * static_cast<double>(total);
  require(cost <= config.budget, ErrorKind::resource,
          "R * N * steps = " + std::to_string(cost) + " exceeds the budget " + std::to_string(config.budget));

  EnsembleRun run = sample_initial(law, config.N, config.R, config.seed, config.dim);
  run.config = config;
  run.coefficients = cs.description;
  std::vector<double> initial = std::move(run.snapshots.front());
  run.snapshots.clear();
  run.times.clear();
  run.steps.clear();

  std::vector<std::pair<std::int64_t, double>> targets;
  for (double t : config.snapshot_times) {
    require(t >= 0.0 && t <= config.T + 1e-12, ErrorKind::configuration, "snapshot time outside [0, T]");
    const std::int64_t s = snap_steps(t, config.dt);
    const double snapped = static_cast<double>(s) * config.dt;
    if (std::abs(snapped - t) > 1e-9 * std::max(1.0, t)) {
      run.warnings.push_back("snapshot time " + std::to_string(t) + " snapped to " + std::to_string(snapped));
    }
    targets.emplace_back(s, t);
  }
  std::sort(targets.begin(), targets.end());

  const bool fast = kernel == Kernel::fast || (kernel == Kernel::automatic && cs.all_series());
  std::optional<kernels::PairwiseSeries> series;
  if (fast) series = kernels::PairwiseSeries::compile(cs);

  kernels::StepPlan plan;
  plan.N = config.N;
  plan.dim = config.dim;
  plan.dt = config.dt;
  plan.seed = config.seed;
  plan.include_self = config.include_self;
  std::int64_t at = 0;
  for (const auto& [s, t] : targets) {
    plan.first_step = at;
    plan.steps = s - at;
    if (plan.steps > 0) {
      if (fast) {
        kernels::advance_ensemble_parallel(*series, plan, initial, config.workers);
      } else {
        kernels::advance_ensemble_reference(cs, plan, initial, config.workers);
      }
    }
    at = s;
    run.times.push_back(t);
    run.steps.push_back(s);
    run.snapshots.push_back(initial);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Snapshot export

std::filesystem::path write_snapshot(const EnsembleRun& run, std::size_t snapshot, const std::filesystem::path& stem) {
  require(snapshot < run.snapshots.size(), ErrorKind::invalid_input, "snapshot index out of range");
  auto bin = stem;
  bin += ".bin";
  auto sidecar = stem;
  sidecar += ".json";
  const auto& data = run.snapshots[snapshot];
  {
    std::ofstream os(bin, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::io, "cannot open " + bin.string());
    for (double v : data) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
      os.write(buf, 8);
    }
  }
  nlohmann::json j;
  j["format"] = "f64le";
  j["layout"] = "[replica][particle][dim]";
  j["data"] = bin.filename().string();
  j["count"] = data.size();
  j["time"] = run.times[snapshot];
  j["step"] = run.steps[snapshot];
  j["config"] = {{"N", run.config.N},         {"dim", run.config.dim},   {"dt", run.config.dt},
                 {"T", run.config.T},         {"R", run.config.R},       {"seed", run.config.seed},
                 {"include_self", run.config.include_self}};
  j["initial_law"] = {{"name", run.law.name()}, {"kappa", run.law.kappa}, {"mode", run.law.mode},
                      {"separation", run.law.separation}};
  j["coefficients"] = run.coefficients.empty() ? nlohmann::json() : nlohmann::json::parse(run.coefficients);
  j["git_describe"] = build_version();
  std::ofstream os(sidecar);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open " + sidecar.string());
  os << j.dump(2) << '\n';
  return sidecar;
}

std::vector<double> read_snapshot(const std::filesystem::path& sidecar, SimConfig* config, double* time) {
  std::ifstream is(sidecar);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open " + sidecar.string());
  try {
    nlohmann::json j;
    is >> j;
    const auto count = j.at("count").get<std::size_t>();
    std::ifstream bs(sidecar.parent_path() / j.at("data").get<std::string>(), std::ios::binary);
    require(static_cast<bool>(bs), ErrorKind::io, "cannot open snapshot data");
    std::vector<unsigned char> raw(count * 8);
    bs.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    require(static_cast<std::size_t>(bs.gcount()) == raw.size(), ErrorKind::io, "truncated snapshot data");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[i * 8 + static_cast<std::size_t>(b)]) << (8 * b);
      out[i] = std::bit_cast<double>(bits);
    }
    if (config) {
      const auto& c = j.at("config");
      config->N = c.at("N");
      config->dim = c.at("dim");
      config->dt = c.at("dt");
      config->T = c.at("T");
      config->R = c.at("R");
      config->seed = c.at("seed");
      config->include_self = c.at("include_self");
    }
    if (time) *time = j.at("time");
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("snapshot sidecar: ") + e.what());
  }
}

}  // namespace chaoslab
