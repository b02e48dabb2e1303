#include "chaoslab/divergence_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "chaoslab/rng.hpp"

namespace chaoslab {

namespace {

void require_same_grid(const GriddedDensity& p, const GriddedDensity& q) {
  require(p.axes() == q.axes() && p.resolution() == q.resolution(), ErrorKind::shape,
          "densities must share axes and resolution");
}

// Cell codes of every histogrammed tuple, grouped by replica.
struct TupleCodes {
  int R = 0;
  int per_replica = 0;
  std::vector<std::uint32_t> codes;  // R * per_replica
};

TupleCodes tuple_codes(const EnsembleRun& run, double time, int k, int G, TupleMode mode) {
  require(run.dim() == 1, ErrorKind::shape, "histograms are one-dimensional per particle");
  require(k >= 1 && k <= run.N(), ErrorKind::invalid_input, "need 1 <= k <= N");
  checked_cell_count(k, G);
  const std::size_t s = run.snapshot_index(time);
  TupleCodes t;
  t.R = run.R();
  t.per_replica = mode == TupleMode::first ? 1 : run.N() / k;
  t.codes.resize(static_cast<std::size_t>(t.R) * static_cast<std::size_t>(t.per_replica));
  for (int r = 0; r < t.R; ++r) {
    const auto x = run.replica(s, r);
    for (int j = 0; j < t.per_replica; ++j) {
      std::uint32_t code = 0;
      for (int i = 0; i < k; ++i) {
        const double v = wrap(x[static_cast<std::size_t>(j * k + i)]);
        const auto c = std::min(G - 1, static_cast<int>(v * G));
        code = code * static_cast<std::uint32_t>(G) + static_cast<std::uint32_t>(c);
      }
      t.codes[static_cast<std::size_t>(r) * static_cast<std::size_t>(t.per_replica) + static_cast<std::size_t>(j)] = code;
    }
  }
  return t;
}

// Cell probabilities of the reference product law.
std::vector<double> reference_probabilities(const GriddedDensity& mu, int k) {
  const auto prod = product_density(mu, k);
  std::vector<double> q(prod.values().begin(), prod.values().end());
  const double vol = prod.cell_volume();
  for (double& v : q) v *= vol;
  return q;
}

struct PluginValues {
  double H = 0, chi2 = 0, tv = 0;
};

PluginValues plugin(const std::vector<double>& counts, double n, double alpha, const std::vector<double>& q) {
  const double total = n + alpha * static_cast<double>(counts.size());
  PluginValues out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double p = (counts[c] + alpha) / total;
    if (p > 0.0) out.H += p * std::log(p / q[c]);
    out.chi2 += (p - q[c]) * (p - q[c]) / q[c];
    out.tv += std::abs(p - q[c]);
  }
  out.tv *= 0.5;
  return out;
}

// Aggregate k-axis counts on G cells to G/2 cells per axis.
std::vector<double> halve_counts(const std::vector<double>& counts, int k, int G) {
  const int g2 = G / 2;
  std::vector<double> out(checked_cell_count(k, g2), 0.0);
  for (std::size_t idx = 0; idx < counts.size(); ++idx) {
    std::size_t rest = idx, code = 0, scale = 1;
    for (int a = 0; a < k; ++a) {
      code += (rest % static_cast<std::size_t>(G)) / 2 * scale;
      rest /= static_cast<std::size_t>(G);
      scale *= static_cast<std::size_t>(g2);
    }
    out[code] += counts[idx];
  }
  return out;
}

}  // namespace

std::string DivergenceReport::to_json() const {
  nlohmann::json j;
  j["kind"] = kind == EstimatorKind::quadrature ? "quadrature" : "histogram-plugin";
  j["H"] = H;
  j["chi2"] = chi2;
  j["tv"] = tv;
  if (fisher) j["fisher"] = *fisher;
  j["resolution"] = resolution;
  j["axes"] = axes;
  if (kind == EstimatorKind::histogram_plugin) {
    j["alpha"] = alpha;
    j["R"] = R;
    j["samples"] = samples;
    j["bootstrap"] = bootstrap;
    j["se"] = se;
    j["H_debiased"] = H_debiased;
    j["bias_bound"] = bias_bound;
    j["H_half"] = H_half;
    j["bias_proxy"] = bias_proxy;
    j["warnings"] = warnings;
  }
  return j.dump();
}

DivergenceReport divergence_grid(const GriddedDensity& p, const GriddedDensity& q) {
  require_same_grid(p, q);
  DivergenceReport r;
  r.kind = EstimatorKind::quadrature;
  r.resolution = p.resolution();
  r.axes = p.axes();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p[i], b = q[i];
    if (b <= 0.0) {
      if (a > 0.0) fail(ErrorKind::absolute_continuity, "reference density vanishes on a cell where p > 0");
      continue;
    }
    if (a > 0.0) r.H += a * std::log(a / b);
    r.chi2 += (a - b) * (a - b) / b;
    r.tv += std::abs(a - b);
  }
  const double vol = p.cell_volume();
  r.H *= vol;
  r.chi2 *= vol;
  r.tv *= 0.5 * vol;
  return r;
}

double fisher_grid(const GriddedDensity& p, const GriddedDensity& q) {
  require_same_grid(p, q);
  require(p.min_value() > 0.0 && q.min_value() > 0.0, ErrorKind::positivity_loss,
          "Fisher information needs strictly positive densities");
  GridFunction lr{p.axes(), p.resolution(), std::vector<double>(p.size())};
  for (std::size_t i = 0; i < p.size(); ++i) lr.values[i] = std::log(p[i]) - std::log(q[i]);
  const auto g = periodic_gradient(lr);
  double s = 0.0;
  for (int a = 0; a < p.axes(); ++a) {
    const auto comp = g.axis(a);
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * comp[i] * comp[i];
  }
  return s * p.cell_volume();
}

GriddedDensity mc_marginal_histogram(const EnsembleRun& run, double time, int k, int resolution,
                                     const HistogramOptions& opt) {
  require(opt.alpha >= 0.0, ErrorKind::invalid_input, "smoothing must be nonnegative");
  const auto t = tuple_codes(run, time, k, resolution, opt.tuples);
  std::vector<double> v(checked_cell_count(k, resolution), opt.alpha);
  for (auto c : t.codes) v[c] += 1.0;
  return GriddedDensity::normalized(k, resolution, std::move(v));
}

DivergenceReport mc_entropy_estimate(const EnsembleRun& run, double time, int k, const MeanFieldSolution& mf,
                                     int resolution, const HistogramOptions& opt) {
  const int G = resolution;
  require(G >= 2 && G % 2 == 0, ErrorKind::invalid_input, "histogram resolution must be even");
  require(mf.resolution % G == 0, ErrorKind::shape, "mean-field resolution must be a multiple of the histogram's");
  require(opt.alpha > 0.0, ErrorKind::invalid_input, "the plug-in estimate needs alpha > 0");
  require(opt.bootstrap >= 2, ErrorKind::invalid_input, "need at least two bootstrap resamples");

  const auto t = tuple_codes(run, time, k, G, opt.tuples);
  const auto mu = coarsen(mf.at(time), G);
  const auto q = reference_probabilities(mu, k);
  const auto q_half = reference_probabilities(coarsen(mu, G / 2), k);
  const std::size_t cells = q.size();
  const double n = static_cast<double>(t.codes.size());

  std::vector<double> counts(cells, 0.0);
  for (auto c : t.codes) counts[c] += 1.0;

  DivergenceReport r;
  r.kind = EstimatorKind::histogram_plugin;
  r.resolution = G;
  r.axes = k;
  r.alpha = opt.alpha;
  r.R = t.R;
  r.samples = static_cast<std::int64_t>(t.codes.size());
  r.bootstrap = opt.bootstrap;
  const auto full = plugin(counts, n, opt.alpha, q);
  r.H = full.H;
  r.chi2 = full.chi2;
  r.tv = full.tv;
  r.H_half = plugin(halve_counts(counts, k, G), n, opt.alpha, q_half).H;
  r.bias_proxy = r.H - r.H_half;
  const double dof = static_cast<double>(cells) - 1.0;
  r.bias_bound = (dof + 4.0 * std::sqrt(2.0 * dof)) / (2.0 * n);
  if (n / static_cast<double>(cells) < 10.0)
    r.warnings.push_back("fewer than 10 expected samples per cell (" + std::to_string(n / cells) + ")");

  // Replica bootstrap; resample b draws from its own counter stream.
  const auto key = rng::key_from_seed(opt.seed);
  const int R = t.R;
  const auto per = static_cast<std::size_t>(t.per_replica);
  std::vector<double> reps(static_cast<std::size_t>(opt.bootstrap));
#pragma omp parallel
  {
    std::vector<double> bc(cells);
#pragma omp for schedule(dynamic, 4)
    for (int b = 0; b < opt.bootstrap; ++b) {
      std::fill(bc.begin(), bc.end(), 0.0);
      for (int i = 0; i < R; i += 2) {
        const auto u = rng::uniform2(key, rng::make_counter(static_cast<std::uint32_t>(i / 2), 0,
                                                             static_cast<std::uint32_t>(b), rng::Purpose::bootstrap));
        for (int lane = 0; lane < 2 && i + lane < R; ++lane) {
          const auto pick = std::min<std::size_t>(static_cast<std::size_t>(R) - 1,
                                                  static_cast<std::size_t>(u[static_cast<std::size_t>(lane)] * R));
          const std::uint32_t* c = t.codes.data() + pick * per;
          for (std::size_t j = 0; j < per; ++j) bc[c[j]] += 1.0;
        }
      }
      reps[static_cast<std::size_t>(b)] = plugin(bc, n, opt.alpha, q).H;
    }
  }
  double mean = 0.0;
  for (double v : reps) mean += v;
  mean /= static_cast<double>(reps.size());
  double var = 0.0;
  for (double v : reps) var += (v - mean) * (v - mean);
  r.se = std::sqrt(var / static_cast<double>(reps.size() - 1));
  r.H_debiased = 2.0 * r.H - mean;
  return r;
}

}  // namespace chaoslab
