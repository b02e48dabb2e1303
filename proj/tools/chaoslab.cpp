// chaoslab: experiment driver.
//
//   chaoslab <certify|simulate|meanfield|oracle|entropy|hierarchy|sweep|fit>
//            --config PATH [--out DIR] [--workers INT] [--force]
//
// Exit codes: 0 success, 2 configuration error, 3 budget refusal,
// 4 partial failure, 1 any other error.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "chaoslab/bbgky_oracle.hpp"
#include "chaoslab/experiment.hpp"
#include "chaoslab/hierarchy.hpp"
#include "chaoslab/mean_field.hpp"

namespace fs = std::filesystem;
using namespace chaoslab;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitBudget = 3;
constexpr int kExitPartial = 4;

struct Options {
  std::string config;
  std::string out;
  int workers = 0;
  bool force = false;
};

struct BudgetRefusal {};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::io, "cannot write " + path.string());
  os << text;
}

void check_budget(const CostEstimate& est, const ExperimentConfig& cfg, bool force) {
  const double cap = effective_budget(cfg);
  std::cerr << "predicted cost (cap " << cap << "):\n" << est.describe();
  if (est.total() > cap) {
    if (!force) {
      std::cerr << "refusing to start: predicted cost exceeds the cap (use --force or raise CHAOSLAB_BUDGET)\n";
      throw BudgetRefusal{};
    }
    std::cerr << "cap exceeded, continuing because of --force\n";
  }
}

std::vector<double> snapshot_grid(double T, double dt) {
  const int n = static_cast<int>(std::llround(T / dt));
  std::vector<double> t;
  for (int i = 0; i <= n; ++i) t.push_back(std::min(T, i * dt));
  return t;
}

int cmd_certify(const ExperimentConfig& cfg, const fs::path& out) {
  const auto cs = build_coefficients(cfg);
  json j = json::parse(cs.certificate()->to_json());
  j["preset"] = cfg.preset;
  j["description"] = cs.description;
  j["sup_b_hat"] = cs.sup_b_hat();
  j["sup_a2"] = cs.sup_a2();
  write_file(out / "certificate.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return cs.certificate()->condition_iv_holds ? 0 : 1;
}

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& out, bool force) {
  check_budget(estimate_sweep_cost(cfg), cfg, force);
  const auto cs = build_coefficients(cfg);
  const auto law = build_law(cfg);
  for (int N : cfg.N) {
    SimConfig sc;
    sc.N = N;
    sc.dim = cfg.dim;
    sc.dt = cfg.dt;
    sc.T = cfg.times.back();
    sc.R = cfg.R;
    sc.seed = cfg.seed;
    sc.snapshot_times = cfg.times;
    sc.include_self = cfg.include_self;
    sc.budget = std::numeric_limits<double>::infinity();
    const auto run = simulate_ensemble(sc, cs, law);
    for (std::size_t s = 0; s < run.times.size(); ++s) {
      const auto path = write_snapshot(run, s, out / ("sim_N" + std::to_string(N) + "_s" + std::to_string(s)));
      std::cout << path.string() << "\n";
    }
    for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
  }
  return 0;
}

MeanFieldSolution mean_field_for(const ExperimentConfig& cfg, int resolution, const std::vector<double>& times) {
  const auto law = build_law(cfg);
  const auto mu0 = cell_average_density(resolution, [&](double x) { return initial_density(law, x); });
  return solve_mean_field(mu0, build_coefficients(cfg), times.back(), times);
}

int cmd_meanfield(const ExperimentConfig& cfg, const fs::path& out) {
  require(cfg.dim == 1, ErrorKind::configuration, "$.dim: the mean-field solver is one-dimensional");
  const auto mf = mean_field_for(cfg, cfg.mf_resolution, cfg.times);
  std::cout << save_mean_field(mf, out / "meanfield").string() << "\n";
  return 0;
}

int cmd_oracle(const ExperimentConfig& cfg, const fs::path& out, bool force) {
  check_budget(estimate_oracle_cost(cfg), cfg, force);
  const auto& o = cfg.oracle;
  const auto cs = build_coefficients(cfg);
  const auto times = snapshot_grid(o.T, o.dt_snap);
  const auto law = build_law(cfg);
  const auto joint = solve_joint_fp(o.N, cs, initial_joint_density(law, o.N, o.G), o.T, times);
  const auto mf = mean_field_for(cfg, o.G, times);
  const auto eps = choose_epsilons(cs.lambda1(), cs.eta());
  json summary;
  summary["N"] = o.N;
  summary["G"] = o.G;
  double asym = 0.0;
  for (const auto& d : joint.densities) asym = std::max(asym, max_axis_asymmetry(d));
  summary["max_axis_asymmetry"] = asym;
  std::vector<EntropyProductionReport> reports;
  for (int k = 1; k <= o.N; ++k) {
    reports.push_back(evaluate_entropy_production(joint, mf, cs, k, eps));
    const auto path = out / ("oracle_k" + std::to_string(k) + ".csv");
    write_report_csv(reports.back(), path);
    summary["min_margin"][std::to_string(k)] = reports.back().min_margin();
    std::cout << path.string() << "\n";
  }
  summary["lambda1"] = reports.front().lambda1;
  summary["eta"] = reports.front().eta;
  write_file(out / "oracle.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_entropy(const ExperimentConfig& cfg, const fs::path& out, bool force) {
  check_budget(estimate_sweep_cost(cfg), cfg, force);
  require(cfg.dim == 1, ErrorKind::configuration, "$.dim: histogram estimates are one-dimensional");
  const auto cs = build_coefficients(cfg);
  const auto law = build_law(cfg);
  const auto mf = mean_field_for(cfg, cfg.mf_resolution, cfg.times);
  json all = json::array();
  int failed = 0;
  for (int N : cfg.N) {
    SimConfig sc;
    sc.N = N;
    sc.dt = cfg.dt;
    sc.T = cfg.times.back();
    sc.R = cfg.R;
    sc.seed = cfg.seed;
    sc.snapshot_times = cfg.times;
    sc.include_self = cfg.include_self;
    sc.budget = std::numeric_limits<double>::infinity();
    const auto run = simulate_ensemble(sc, cs, law);
    for (int k : cfg.k)
      for (double t : cfg.times) {
        json row = {{"N", N}, {"k", k}, {"t", t}};
        try {
          row["estimate"] = json::parse(mc_entropy_estimate(run, t, k, mf, cfg.G, histogram_options(cfg)).to_json());
        } catch (const Error& e) {
          row["error"] = e.what();
          ++failed;
        }
        all.push_back(row);
      }
  }
  write_file(out / "entropy.json", all.dump(2) + "\n");
  std::cout << all.dump(2) << "\n";
  return failed ? kExitPartial : 0;
}

int cmd_hierarchy(const ExperimentConfig& cfg, const fs::path& out, bool force) {
  check_budget(estimate_hierarchy_cost(cfg), cfg, force);
  const auto& h = cfg.hierarchy;
  const auto cs = build_coefficients(cfg);
  const auto eps = choose_epsilons(cs.lambda1(), cs.eta());
  const auto supplier = h.supplier == "zero" ? YSupplier::zero() : YSupplier::proportional(h.lambda);
  std::vector<HierarchyTrajectory> runs;
  json summary;
  summary["c1"] = eps.c1;
  summary["c2"] = eps.c2;
  bool ok = true;
  for (int N : h.N) {
    HierarchyParams p;
    p.N = N;
    p.beta = h.beta;
    p.c1 = eps.c1;
    p.c2 = eps.c2;
    p.C0 = h.C0;
    p.M1 = h.M1;
    p.M2 = h.M2;
    p.M3 = h.M3;
    p.T = h.T;
    runs.push_back(integrate_closed_hierarchy(p, supplier, h.steps));
    const auto rep = verify_hypotheses(runs.back(), p);
    write_file(out / ("hierarchy_N" + std::to_string(N) + ".csv"), rep.to_csv());
    json r = {{"worst_initial", rep.worst_initial},
              {"worst_monotonicity", rep.worst_monotonicity},
              {"worst_differential", rep.worst_differential},
              {"truncation", rep.truncation},
              {"holds", rep.holds(1e-6)},
              {"M", fit_envelope(runs.back(), h.beta)}};
    ok = ok && rep.holds(1e-6);
    summary["N"][std::to_string(N)] = r;
  }
  summary["M_uniform"] = fit_envelope(runs, h.beta);
  summary["beta"] = h.beta;
  write_file(out / "hierarchy.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return ok ? 0 : 1;
}

int cmd_sweep(const ExperimentConfig& cfg, const fs::path& out, bool force) {
  check_budget(estimate_sweep_cost(cfg), cfg, force);
  require(cfg.dim == 1, ErrorKind::configuration, "$.dim: the sweep is one-dimensional");
  const auto res = run_scaling_sweep(cfg, out / "sweep.csv", [](const std::string& s) { std::cerr << s << "\n"; });
  std::cerr << res.rows.size() << " rows written, " << res.skipped << " already present, " << res.failed
            << " failed\n";
  return res.failed ? kExitPartial : 0;
}

int cmd_fit(const ExperimentConfig& cfg, const fs::path& out) {
  const auto rows = read_scaling_csv(out / "sweep.csv");
  require(!rows.empty(), ErrorKind::io, "no rows in " + (out / "sweep.csv").string());
  json fits = json::array();
  auto attempt = [&](SlopeAxis axis, int fixed, double t) {
    json f = {{"axis", axis == SlopeAxis::N_at_fixed_k ? "N" : "k"},
              {axis == SlopeAxis::N_at_fixed_k ? "k" : "N", fixed},
              {"t", t}};
    try {
      f["fit"] = json::parse(fit_scaling_slope(rows, axis, fixed, t).to_json());
    } catch (const Error& e) {
      f["error"] = e.what();
    }
    fits.push_back(f);
  };
  for (double t : cfg.times) {
    for (int k : cfg.k) attempt(SlopeAxis::N_at_fixed_k, k, t);
    if (cfg.k.size() >= 3)
      for (int N : cfg.N) attempt(SlopeAxis::k_at_fixed_N, N, t);
  }
  write_file(out / "fit.json", fits.dump(2) + "\n");
  std::cout << fits.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chaoslab: particle systems, mean-field limits and entropy hierarchies on the torus"};
  app.require_subcommand(1, 1);
  Options opt;
  const char* names[] = {"certify", "simulate", "meanfield", "oracle", "entropy", "hierarchy", "sweep", "fit"};
  const char* help[] = {"certify ellipticity and smallness of the preset",
                        "simulate the particle ensemble and write snapshots",
                        "solve the mean-field equation and write densities",
                        "solve the joint Fokker-Planck equation and report entropy production",
                        "Monte Carlo relative entropy estimates",
                        "integrate and verify the hierarchy of differential inequalities",
                        "run the scaling sweep with resumable CSV output",
                        "fit power-law slopes to the sweep output"};
  for (std::size_t i = 0; i < std::size(names); ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", opt.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (overrides the config)");
    sub->add_option("--workers", opt.workers, "thread count (0 = default)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--force", opt.force, "run even when the predicted cost exceeds the budget");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    auto cfg = parse_config(opt.config);
    if (!opt.out.empty()) cfg.output = opt.out;
    if (opt.workers > 0) omp_set_num_threads(opt.workers);
    const fs::path out = cfg.output;
    fs::create_directories(out);
    write_file(out / "config.json", cfg.to_json() + "\n");
    std::cerr << "config echoed to " << (out / "config.json").string() << "\n";

    if (cmd == "certify") return cmd_certify(cfg, out);
    if (cmd == "simulate") return cmd_simulate(cfg, out, opt.force);
    if (cmd == "meanfield") return cmd_meanfield(cfg, out);
    if (cmd == "oracle") return cmd_oracle(cfg, out, opt.force);
    if (cmd == "entropy") return cmd_entropy(cfg, out, opt.force);
    if (cmd == "hierarchy") return cmd_hierarchy(cfg, out, opt.force);
    if (cmd == "sweep") return cmd_sweep(cfg, out, opt.force);
    return cmd_fit(cfg, out);
  } catch (const BudgetRefusal&) {
    return kExitBudget;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::configuration ? kExitConfig : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
