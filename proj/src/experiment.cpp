#include "chaoslab/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "chaoslab/mean_field.hpp"

namespace chaoslab {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  fail(ErrorKind::configuration, path + ": " + what);
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(path, "expected an object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      config_error(path + "." + key, "unknown key");
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) config_error(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) config_error(path, "must be finite");
  return v;
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) config_error(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) config_error(path, "out of range");
  return static_cast<int>(v);
}

template <class T, class F>
void read_opt(const json& j, const char* key, const std::string& path, T& out, F&& get) {
  if (j.contains(key)) out = get(j.at(key), path + "." + key);
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) config_error(path, "expected a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) config_error(path, "expected a boolean");
  return j.get<bool>();
}

template <class T, class F>
std::vector<T> get_list(const json& j, const std::string& path, F&& get) {
  if (!j.is_array() || j.empty()) config_error(path, "expected a non-empty array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void validate(const ExperimentConfig& c) {
  static const std::set<std::string> presets = {"perturbed_constant", "landau_like", "zero_interaction"};
  static const std::set<std::string> laws = {"uniform", "cosine_exponential", "exchangeable_mixture"};
  if (!presets.count(c.preset)) config_error("$.preset", "unknown preset '" + c.preset + "'");
  if (!laws.count(c.law)) config_error("$.initial_law.name", "unknown law '" + c.law + "'");
  if (c.dim < 1 || c.dim > 3) config_error("$.dim", "must be 1, 2 or 3");
  for (std::size_t i = 0; i < c.N.size(); ++i)
    if (c.N[i] < 1) config_error("$.N[" + std::to_string(i) + "]", "must be positive");
  for (std::size_t i = 0; i < c.k.size(); ++i)
    if (c.k[i] < 1) config_error("$.k[" + std::to_string(i) + "]", "must be positive");
  const int min_N = *std::min_element(c.N.begin(), c.N.end());
  for (int k : c.k)
    if (k > min_N)
      config_error("$.k", "sweep cell (N=" + std::to_string(min_N) + ", k=" + std::to_string(k) + ") has k > N");
  for (std::size_t i = 0; i < c.times.size(); ++i)
    if (c.times[i] < 0.0) config_error("$.times[" + std::to_string(i) + "]", "must be >= 0");
  if (c.R < 1) config_error("$.R", "must be positive");
  if (!(c.dt > 0.0)) config_error("$.dt", "must be positive");
  if (c.G < 2 || c.G % 2) config_error("$.G", "must be even and >= 2");
  if (c.mf_resolution < c.G || c.mf_resolution % c.G)
    config_error("$.mf_resolution", "must be a multiple of G");
  if (!(c.alpha > 0.0)) config_error("$.alpha", "must be positive");
  if (c.bootstrap < 2) config_error("$.bootstrap", "must be >= 2");
  if (c.tuples != "all_disjoint" && c.tuples != "first") config_error("$.tuples", "must be all_disjoint or first");
  if (!(c.budget > 0.0)) config_error("$.budget", "must be positive");
  if (c.oracle.N < 1 || c.oracle.N > 3) config_error("$.oracle.N", "must be 1, 2 or 3");
  if (c.oracle.G < 4) config_error("$.oracle.G", "must be >= 4");
  if (!(c.oracle.dt_snap > 0.0) || !(c.oracle.T > 0.0)) config_error("$.oracle", "dt_snap and T must be positive");
  if (c.hierarchy.supplier != "zero" && c.hierarchy.supplier != "proportional")
    config_error("$.hierarchy.supplier", "must be zero or proportional");
  if (c.hierarchy.steps < 1) config_error("$.hierarchy.steps", "must be positive");
  for (std::size_t i = 0; i < c.hierarchy.N.size(); ++i)
    if (c.hierarchy.N[i] < 1) config_error("$.hierarchy.N[" + std::to_string(i) + "]", "must be positive");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string csv_quote(const std::string& s) {
  std::string q = s;
  std::replace(q.begin(), q.end(), '"', '\'');
  return '"' + q + '"';
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& o) const { return to_json() == o.to_json(); }

std::string ExperimentConfig::to_json() const {
  json j;
  j["preset"] = preset;
  j["preset_params"] = {{"alpha0", params.alpha0}, {"alpha1", params.alpha1}, {"c2", params.c2},
                        {"eps_a", params.eps_a},   {"beta0", params.beta0},   {"eps_offdiag", params.eps_offdiag},
                        {"a1", params.a1}};
  j["dim"] = dim;
  j["initial_law"] = {{"name", law}, {"kappa", kappa}, {"mode", mode}, {"separation", separation}};
  j["N"] = N;
  j["k"] = k;
  j["times"] = times;
  j["R"] = R;
  j["dt"] = dt;
  j["G"] = G;
  j["mf_resolution"] = mf_resolution;
  j["seed"] = seed;
  j["alpha"] = alpha;
  j["bootstrap"] = bootstrap;
  j["tuples"] = tuples;
  j["include_self"] = include_self;
  j["output"] = output;
  j["budget"] = budget;
  j["oracle"] = {{"N", oracle.N}, {"G", oracle.G}, {"dt_snap", oracle.dt_snap}, {"T", oracle.T}};
  j["hierarchy"] = {{"N", hierarchy.N},         {"beta", hierarchy.beta},   {"C0", hierarchy.C0},
                    {"M1", hierarchy.M1},       {"M2", hierarchy.M2},       {"M3", hierarchy.M3},
                    {"T", hierarchy.T},         {"steps", hierarchy.steps}, {"supplier", hierarchy.supplier},
                    {"lambda", hierarchy.lambda}};
  return j.dump(2);
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error("$", std::string("invalid JSON: ") + e.what());
  }
  only_keys(j, "$",
            {"preset", "preset_params", "dim", "initial_law", "N", "k", "times", "R", "dt", "G", "mf_resolution",
             "seed", "alpha", "bootstrap", "tuples", "include_self", "output", "budget", "oracle", "hierarchy"});
  for (const char* req : {"preset", "N", "k", "times"})
    if (!j.contains(req)) config_error(std::string("$.") + req, "required");

  ExperimentConfig c;
  c.preset = get_string(j["preset"], "$.preset");
  if (j.contains("preset_params")) {
    const auto& p = j["preset_params"];
    only_keys(p, "$.preset_params", {"alpha0", "alpha1", "c2", "eps_a", "beta0", "eps_offdiag", "a1"});
    const std::string base = "$.preset_params";
    read_opt(p, "alpha0", base, c.params.alpha0, get_number);
    read_opt(p, "alpha1", base, c.params.alpha1, get_number);
    read_opt(p, "c2", base, c.params.c2, get_number);
    read_opt(p, "eps_a", base, c.params.eps_a, get_number);
    read_opt(p, "beta0", base, c.params.beta0, get_number);
    read_opt(p, "eps_offdiag", base, c.params.eps_offdiag, get_number);
    read_opt(p, "a1", base, c.params.a1, get_number);
  }
  read_opt(j, "dim", "$", c.dim, get_int);
  if (j.contains("initial_law")) {
    const auto& l = j["initial_law"];
    only_keys(l, "$.initial_law", {"name", "kappa", "mode", "separation"});
    read_opt(l, "name", "$.initial_law", c.law, get_string);
    read_opt(l, "kappa", "$.initial_law", c.kappa, get_number);
    read_opt(l, "mode", "$.initial_law", c.mode, get_number);
    read_opt(l, "separation", "$.initial_law", c.separation, get_number);
  }
  c.N = get_list<int>(j["N"], "$.N", get_int);
  c.k = get_list<int>(j["k"], "$.k", get_int);
  c.times = get_list<double>(j["times"], "$.times", get_number);
  read_opt(j, "R", "$", c.R, get_int);
  read_opt(j, "dt", "$", c.dt, get_number);
  read_opt(j, "G", "$", c.G, get_int);
  read_opt(j, "mf_resolution", "$", c.mf_resolution, get_int);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0))
      config_error("$.seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  read_opt(j, "alpha", "$", c.alpha, get_number);
  read_opt(j, "bootstrap", "$", c.bootstrap, get_int);
  read_opt(j, "tuples", "$", c.tuples, get_string);
  read_opt(j, "include_self", "$", c.include_self, get_bool);
  read_opt(j, "output", "$", c.output, get_string);
  read_opt(j, "budget", "$", c.budget, get_number);
  if (j.contains("oracle")) {
    const auto& o = j["oracle"];
    only_keys(o, "$.oracle", {"N", "G", "dt_snap", "T"});
    read_opt(o, "N", "$.oracle", c.oracle.N, get_int);
    read_opt(o, "G", "$.oracle", c.oracle.G, get_int);
    read_opt(o, "dt_snap", "$.oracle", c.oracle.dt_snap, get_number);
    read_opt(o, "T", "$.oracle", c.oracle.T, get_number);
  }
  if (j.contains("hierarchy")) {
    const auto& h = j["hierarchy"];
    const std::string base = "$.hierarchy";
    only_keys(h, base, {"N", "beta", "C0", "M1", "M2", "M3", "T", "steps", "supplier", "lambda"});
    if (h.contains("N")) c.hierarchy.N = get_list<int>(h["N"], base + ".N", get_int);
    read_opt(h, "beta", base, c.hierarchy.beta, get_number);
    read_opt(h, "C0", base, c.hierarchy.C0, get_number);
    read_opt(h, "M1", base, c.hierarchy.M1, get_number);
    read_opt(h, "M2", base, c.hierarchy.M2, get_number);
    read_opt(h, "M3", base, c.hierarchy.M3, get_number);
    read_opt(h, "T", base, c.hierarchy.T, get_number);
    read_opt(h, "steps", base, c.hierarchy.steps, get_int);
    read_opt(h, "supplier", base, c.hierarchy.supplier, get_string);
    read_opt(h, "lambda", base, c.hierarchy.lambda, get_number);
  }
  std::sort(c.times.begin(), c.times.end());
  c.times.erase(std::unique(c.times.begin(), c.times.end()), c.times.end());
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error(path.string(), "cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

CoefficientSet build_coefficients(const ExperimentConfig& cfg) {
  try {
    return build_preset(cfg.preset, cfg.params, cfg.dim);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::invalid_input) config_error("$.preset_params", e.what());
    throw;
  }
}

InitialLaw build_law(const ExperimentConfig& cfg) {
  try {
    return parse_initial_law(cfg.law, cfg.kappa, cfg.mode, cfg.separation);
  } catch (const Error& e) {
    config_error("$.initial_law", e.what());
  }
}

HistogramOptions histogram_options(const ExperimentConfig& cfg) {
  HistogramOptions o;
  o.alpha = cfg.alpha;
  o.bootstrap = cfg.bootstrap;
  o.tuples = cfg.tuples == "first" ? TupleMode::first : TupleMode::all_disjoint;
  o.seed = cfg.seed ^ 0x5eedb007ull;
  return o;
}

double CostEstimate::total() const {
  double s = 0.0;
  for (const auto& i : items) s += i.cost;
  return s;
}

std::string CostEstimate::describe() const {
  std::ostringstream os;
  os.precision(3);
  for (const auto& i : items) os << "  " << i.what << ": " << i.cost << " ops, " << i.bytes / 1e6 << " MB\n";
  os << "  total: " << total() << " ops\n";
  return os.str();
}

CostEstimate estimate_sweep_cost(const ExperimentConfig& cfg) {
  CostEstimate est;
  const double T = cfg.times.back();
  const double steps = std::ceil(T / cfg.dt - 1e-9);
  const double d2 = static_cast<double>(cfg.dim) * cfg.dim;
  for (int N : cfg.N)
    est.items.push_back({"simulate N=" + std::to_string(N), static_cast<double>(cfg.R) * N * steps * d2,
                         static_cast<double>(cfg.R) * N * cfg.dim * 8.0 * static_cast<double>(cfg.times.size() + 1)});
  const double G = cfg.mf_resolution;
  est.items.push_back({"mean-field G=" + std::to_string(cfg.mf_resolution), G * std::ceil(T * 4 * G * G), G * 8.0});
  return est;
}

CostEstimate estimate_oracle_cost(const ExperimentConfig& cfg) {
  CostEstimate est;
  const double cells = std::pow(static_cast<double>(cfg.oracle.G), cfg.oracle.N);
  const double G = cfg.oracle.G;
  double orders = 1;
  for (int i = 2; i <= cfg.oracle.N; ++i) orders *= i;
  const double steps = std::ceil(cfg.oracle.T * 8.0 * G * G);
  est.items.push_back({"joint N=" + std::to_string(cfg.oracle.N) + " G=" + std::to_string(cfg.oracle.G),
                       cells * steps * orders * cfg.oracle.N, cells * 8.0 * 4});
  return est;
}

CostEstimate estimate_hierarchy_cost(const ExperimentConfig& cfg) {
  CostEstimate est;
  for (int N : cfg.hierarchy.N)
    est.items.push_back({"hierarchy N=" + std::to_string(N), 4.0 * N * cfg.hierarchy.steps,
                         16.0 * N * (cfg.hierarchy.steps + 1)});
  return est;
}

double effective_budget(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("CHAOSLAB_BUDGET")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(v > 0.0)) config_error("CHAOSLAB_BUDGET", "expected a positive number");
    return v;
  }
  return cfg.budget;
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string cell_key(const ExperimentConfig& cfg, int N, int k, double t) {
  std::ostringstream os;
  os << cfg.preset << '|' << num(cfg.params.alpha0) << ',' << num(cfg.params.alpha1) << ',' << num(cfg.params.c2)
     << ',' << num(cfg.params.eps_a) << ',' << num(cfg.params.beta0) << ',' << num(cfg.params.eps_offdiag) << ','
     << num(cfg.params.a1) << '|' << cfg.dim << '|' << cfg.law << ',' << num(cfg.kappa) << ',' << num(cfg.mode) << ','
     << num(cfg.separation) << '|' << N << '|' << k << '|' << num(t) << '|' << num(cfg.times.back()) << '|' << cfg.R
     << '|' << num(cfg.dt) << '|' << cfg.G << '|' << cfg.mf_resolution << '|' << cfg.seed << '|' << num(cfg.alpha)
     << '|' << cfg.bootstrap << '|' << cfg.tuples << '|' << cfg.include_self;
  return hex64(fnv1a64(os.str()));
}

std::string scaling_csv_header() {
  return "key,preset,preset_hash,law,N,k,t,R,dt,G,mf_resolution,alpha,bootstrap,seed,H,se,H_debiased,bias_bound,"
         "H_half,bias_proxy,chi2,tv,samples,status,message";
}

std::string ScalingRow::to_csv() const {
  std::ostringstream os;
  os << key << ',' << preset << ',' << preset_hash << ',' << law << ',' << N << ',' << k << ',' << num(t) << ',' << R
     << ',' << num(dt) << ',' << G << ',' << mf_resolution << ',' << num(alpha) << ',' << bootstrap << ',' << seed
     << ',' << num(H) << ',' << num(se) << ',' << num(H_debiased) << ',' << num(bias_bound) << ',' << num(H_half)
     << ',' << num(bias_proxy) << ',' << num(chi2) << ',' << num(tv) << ',' << samples << ',' << status << ','
     << csv_quote(message);
  return os.str();
}

std::vector<ScalingRow> read_scaling_csv(const std::filesystem::path& path) {
  std::vector<ScalingRow> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  require(line == scaling_csv_header(), ErrorKind::io, path.string() + ": unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 25) continue;  // torn final line after an interrupt
    try {
      ScalingRow r;
      r.key = f[0];
      r.preset = f[1];
      r.preset_hash = f[2];
      r.law = f[3];
      r.N = std::stoi(f[4]);
      r.k = std::stoi(f[5]);
      r.t = std::stod(f[6]);
      r.R = std::stoi(f[7]);
      r.dt = std::stod(f[8]);
      r.G = std::stoi(f[9]);
      r.mf_resolution = std::stoi(f[10]);
      r.alpha = std::stod(f[11]);
      r.bootstrap = std::stoi(f[12]);
      r.seed = std::stoull(f[13]);
      r.H = std::stod(f[14]);
      r.se = std::stod(f[15]);
      r.H_debiased = std::stod(f[16]);
      r.bias_bound = std::stod(f[17]);
      r.H_half = std::stod(f[18]);
      r.bias_proxy = std::stod(f[19]);
      r.chi2 = std::stod(f[20]);
      r.tv = std::stod(f[21]);
      r.samples = std::stoll(f[22]);
      r.status = f[23];
      r.message = f[24];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      // Unparseable line: treated as absent and recomputed.
    }
  }
  return rows;
}

ScalingResult run_scaling_sweep(const ExperimentConfig& cfg, const std::filesystem::path& csv_path,
                                const std::function<void(const std::string&)>& log) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  ScalingResult result;
  std::set<std::string> done;
  bool fresh = !std::filesystem::exists(csv_path) || std::filesystem::file_size(csv_path) == 0;
  if (!fresh)
    for (auto& r : read_scaling_csv(csv_path))
      if (r.status == "ok") done.insert(r.key);

  // Drop a torn last line so appended rows start on a fresh line.
  if (!fresh) {
    std::ifstream in(csv_path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (!text.empty() && text.back() != '\n') {
      text.erase(text.rfind('\n') + 1);
      std::ofstream(csv_path, std::ios::trunc) << text;
    }
  }
  std::ofstream out(csv_path, std::ios::app);
  require(static_cast<bool>(out), ErrorKind::io, "cannot write " + csv_path.string());
  if (fresh) out << scaling_csv_header() << '\n' << std::flush;

  const auto cs = build_coefficients(cfg);
  const auto law = build_law(cfg);
  const std::string preset_hash = hex64(fnv1a64(cs.description));
  const double T = cfg.times.back();

  std::optional<MeanFieldSolution> mf;
  for (int N : cfg.N) {
    std::vector<std::tuple<int, double, std::string>> cells;
    for (int k : cfg.k)
      for (double t : cfg.times) cells.emplace_back(k, t, cell_key(cfg, N, k, t));
    std::vector<ScalingRow> rows;
    const bool all_done = std::all_of(cells.begin(), cells.end(), [&](auto& c) { return done.count(std::get<2>(c)); });
    if (all_done) {
      result.skipped += static_cast<int>(cells.size());
      say("N=" + std::to_string(N) + ": already complete");
      continue;
    }
    auto base_row = [&](int k, double t, const std::string& key) {
      ScalingRow r;
      r.key = key;
      r.preset = cfg.preset;
      r.preset_hash = preset_hash;
      r.law = law.name();
      r.N = N;
      r.k = k;
      r.t = t;
      r.R = cfg.R;
      r.dt = cfg.dt;
      r.G = cfg.G;
      r.mf_resolution = cfg.mf_resolution;
      r.alpha = cfg.alpha;
      r.bootstrap = cfg.bootstrap;
      r.seed = cfg.seed;
      return r;
    };
    try {
      if (!mf) {
        const auto mu0 = cell_average_density(cfg.mf_resolution, [&](double x) { return initial_density(law, x); });
        mf = solve_mean_field(mu0, cs, T, cfg.times);
      }
      SimConfig sc;
      sc.N = N;
      sc.dim = cfg.dim;
      sc.dt = cfg.dt;
      sc.T = T;
      sc.R = cfg.R;
      sc.seed = cfg.seed;
      sc.snapshot_times = cfg.times;
      sc.include_self = cfg.include_self;
      sc.budget = std::numeric_limits<double>::infinity();
      say("N=" + std::to_string(N) + ": simulating");
      const auto run = simulate_ensemble(sc, cs, law);
      for (auto& [k, t, key] : cells) {
        auto r = base_row(k, t, key);
        if (done.count(key)) {
          ++result.skipped;
          continue;
        }
        try {
          const auto e = mc_entropy_estimate(run, t, k, *mf, cfg.G, histogram_options(cfg));
          r.H = e.H;
          r.se = e.se;
          r.H_debiased = e.H_debiased;
          r.bias_bound = e.bias_bound;
          r.H_half = e.H_half;
          r.bias_proxy = e.bias_proxy;
          r.chi2 = e.chi2;
          r.tv = e.tv;
          r.samples = e.samples;
          for (const auto& w : e.warnings) r.message += (r.message.empty() ? "" : "; ") + w;
        } catch (const Error& err) {
          r.status = "failed";
          r.message = err.what();
          ++result.failed;
        }
        rows.push_back(r);
      }
    } catch (const Error& err) {
      for (auto& [k, t, key] : cells) {
        if (done.count(key)) continue;
        auto r = base_row(k, t, key);
        r.status = "failed";
        r.message = err.what();
        ++result.failed;
        rows.push_back(r);
      }
    }
    for (const auto& r : rows) out << r.to_csv() << '\n';
    out.flush();
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  return result;
}

std::string SlopeFit::to_json() const {
  json j;
  j["slope"] = slope;
  j["stderr"] = stderr_;
  j["intercept"] = intercept;
  j["used"] = used;
  j["excluded"] = excluded;
  return j.dump();
}

SlopeFit fit_scaling_slope(const std::vector<ScalingRow>& rows, SlopeAxis axis, int fixed, double t) {
  struct P {
    double x, y, se;
  };
  std::map<double, P> pts;  // last row per axis value wins
  SlopeFit fit;
  for (const auto& r : rows) {
    if (r.status != "ok" || std::abs(r.t - t) > 1e-12) continue;
    if ((axis == SlopeAxis::N_at_fixed_k ? r.k : r.N) != fixed) continue;
    const double a = axis == SlopeAxis::N_at_fixed_k ? r.N : r.k;
    pts[a] = {a, r.H_debiased, r.se};
  }
  std::vector<P> use;
  for (const auto& [a, p] : pts) {
    if (p.y > 3.0 * p.se && p.y > 0.0)
      use.push_back(p);
    else
      fit.excluded.push_back(a);
  }
  if (use.size() < 3)
    fail(ErrorKind::insufficient_signal, "only " + std::to_string(use.size()) + " points above 3 se (need 3)");
  const bool uniform = std::any_of(use.begin(), use.end(), [](const P& p) { return p.se <= 0.0; });
  double sw = 0, sx = 0, sy = 0;
  std::vector<double> w;
  for (const auto& p : use) {
    const double wi = uniform ? 1.0 : (p.y / p.se) * (p.y / p.se);
    w.push_back(wi);
    sw += wi;
    sx += wi * std::log(p.x);
    sy += wi * std::log(p.y);
    fit.used.push_back(p.x);
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < use.size(); ++i) {
    const double dx = std::log(use[i].x) - mx;
    sxx += w[i] * dx * dx;
    sxy += w[i] * dx * (std::log(use[i].y) - my);
  }
  require(sxx > 0.0, ErrorKind::insufficient_signal, "axis values must differ");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (uniform) {
    // Residual-based error when no standard errors are known.
    double rss = 0;
    for (std::size_t i = 0; i < use.size(); ++i) {
      const double e = std::log(use[i].y) - fit.intercept - fit.slope * std::log(use[i].x);
      rss += e * e;
    }
    fit.stderr_ = std::sqrt(rss / static_cast<double>(use.size() - 2) / sxx);
  } else {
    fit.stderr_ = std::sqrt(1.0 / sxx);
  }
  return fit;
}

}  // namespace chaoslab
