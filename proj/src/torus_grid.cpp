#include "chaoslab/torus_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "chaoslab/exact_sum.hpp"

namespace chaoslab {

double wrap(double x) noexcept {
  double r = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1.
  if (r >= 1.0) r = 0.0;
  return r;
}

TorusVector wrap_point(std::span<const double> x) {
  TorusVector v;
  v.coords_.reserve(x.size());
  for (double xi : x) {
    require(std::isfinite(xi), ErrorKind::invalid_input, "wrap_point: non-finite coordinate");
    v.coords_.push_back(wrap(xi));
  }
  return v;
}

std::size_t checked_cell_count(int axes, int resolution, std::size_t budget) {
  require(axes >= 1, ErrorKind::invalid_input, "grid needs at least one axis");
  require(resolution >= 1, ErrorKind::invalid_input, "grid resolution must be positive");
  std::size_t n = 1;
  for (int a = 0; a < axes; ++a) {
    if (n > budget / static_cast<std::size_t>(resolution)) {
      fail(ErrorKind::resource, "grid " + std::to_string(resolution) + "^" + std::to_string(axes) +
                                    " exceeds cell budget " + std::to_string(budget));
    }
    n *= static_cast<std::size_t>(resolution);
  }
  return n;
}

namespace {

double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

double weighted_sum(std::span<const double> v, double weight) {
  ExactSum s;
  for (double x : v) s.add(x);
  return s.value() * weight;
}

}  // namespace

double GriddedDensity::cell_volume() const noexcept { return ipow(mesh(), axes_); }

double GriddedDensity::mass() const noexcept { return weighted_sum(values_, cell_volume()); }

double GriddedDensity::min_value() const noexcept {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

GriddedDensity::GriddedDensity(int axes, int resolution, std::vector<double> values)
    : axes_(axes), resolution_(resolution), values_(std::move(values)) {
  const std::size_t n = checked_cell_count(axes, resolution, std::numeric_limits<std::size_t>::max());
  require(values_.size() == n, ErrorKind::shape,
          "density has " + std::to_string(values_.size()) + " values, expected " + std::to_string(n));
  for (double v : values_) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::invalid_input, "density values must be finite and >= 0");
  }
  const double m = mass();
  require(std::abs(m - 1.0) <= kMassTolerance, ErrorKind::invalid_input,
          "density mass " + std::to_string(m) + " differs from 1");
}

GriddedDensity GriddedDensity::normalized(int axes, int resolution, std::vector<double> values) {
  const std::size_t n = checked_cell_count(axes, resolution, std::numeric_limits<std::size_t>::max());
  require(values.size() == n, ErrorKind::shape, "density value count does not match grid");
  for (double v : values) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::invalid_input, "density values must be finite and >= 0");
  }
  const double m = weighted_sum(values, ipow(1.0 / resolution, axes));
  require(m > 0.0, ErrorKind::invalid_input, "cannot normalize a zero density");
  for (double& v : values) v /= m;
  return GriddedDensity(Unchecked{}, axes, resolution, std::move(values));
}

GriddedDensity GriddedDensity::uniform(int axes, int resolution) {
  const std::size_t n = checked_cell_count(axes, resolution, std::numeric_limits<std::size_t>::max());
  return GriddedDensity(Unchecked{}, axes, resolution, std::vector<double>(n, 1.0));
}

GridFunction circular_convolve(const GridFunction& f, const GriddedDensity& rho) {
  require(f.axes == 1 && rho.axes() == 1, ErrorKind::shape, "circular_convolve works on T^1");
  require(f.resolution == rho.resolution() && f.values.size() == rho.size(), ErrorKind::shape,
          "circular_convolve: resolution mismatch (" + std::to_string(f.resolution) + " vs " +
              std::to_string(rho.resolution()) + ")");
  const int G = rho.resolution();
  const double h = rho.mesh();
  GridFunction out{1, G, std::vector<double>(static_cast<std::size_t>(G))};
  const double* fv = f.values.data();
  const double* rv = rho.values().data();
#pragma omp parallel for schedule(static) if (G >= 256)
  for (int i = 0; i < G; ++i) {
    double acc = 0.0;
    for (int j = 0; j <= i; ++j) acc += fv[i - j] * rv[j];
    for (int j = i + 1; j < G; ++j) acc += fv[i - j + G] * rv[j];
    out.values[static_cast<std::size_t>(i)] = h * acc;
  }
  return out;
}

GradientField periodic_gradient(const GridFunction& f) {
  const int G = f.resolution;
  require(G >= 4, ErrorKind::invalid_input, "periodic_gradient needs at least 4 cells per axis");
  const std::size_t n = checked_cell_count(f.axes, G, std::numeric_limits<std::size_t>::max());
  require(f.values.size() == n, ErrorKind::shape, "grid function size does not match its shape");
  GradientField g{f.axes, G, std::vector<double>(n * static_cast<std::size_t>(f.axes))};
  const double inv2h = 0.5 * G;
  std::size_t stride = n;
  for (int a = 0; a < f.axes; ++a) {
    stride /= static_cast<std::size_t>(G);
    const std::size_t span = stride * static_cast<std::size_t>(G);
    double* out = g.components.data() + static_cast<std::size_t>(a) * n;
    const double* v = f.values.data();
#pragma omp parallel for schedule(static) if (n >= 65536)
    for (std::size_t cell = 0; cell < n; ++cell) {
      const std::size_t block = cell - cell % span;
      const std::size_t within = cell % stride;
      const std::size_t idx = (cell % span) / stride;
      const std::size_t up = idx + 1 == static_cast<std::size_t>(G) ? 0 : idx + 1;
      const std::size_t dn = idx == 0 ? static_cast<std::size_t>(G) - 1 : idx - 1;
      out[cell] = (v[block + up * stride + within] - v[block + dn * stride + within]) * inv2h;
    }
  }
  return g;
}

GradientField periodic_gradient(const GriddedDensity& rho) { return periodic_gradient(rho.as_function()); }

GriddedDensity marginalize(const GriddedDensity& rho, int keep) {
  require(keep >= 1 && keep <= rho.axes(), ErrorKind::invalid_input,
          "marginalize: keep=" + std::to_string(keep) + " outside [1, " + std::to_string(rho.axes()) + "]");
  if (keep == rho.axes()) return rho;
  const int G = rho.resolution();
  const std::size_t outer = checked_cell_count(keep, G, std::numeric_limits<std::size_t>::max());
  const std::size_t inner = rho.size() / outer;
  const double w = ipow(rho.mesh(), rho.axes() - keep);
  std::vector<double> out(outer);
  const auto v = rho.values();
#pragma omp parallel for schedule(static) if (rho.size() >= 65536)
  for (std::size_t o = 0; o < outer; ++o) out[o] = weighted_sum(v.subspan(o * inner, inner), w);
  return GriddedDensity::normalized(keep, G, std::move(out));
}

GriddedDensity product_density(const GriddedDensity& rho, int k, std::size_t budget) {
  require(rho.axes() == 1, ErrorKind::shape, "product_density expects a one-axis density");
  require(k >= 1, ErrorKind::invalid_input, "product_density: k must be >= 1");
  const int G = rho.resolution();
  const std::size_t n = checked_cell_count(k, G, budget);
  std::vector<double> out(n, 1.0);
  std::size_t stride = n;
  for (int a = 0; a < k; ++a) {
    stride /= static_cast<std::size_t>(G);
    for (std::size_t cell = 0; cell < n; ++cell) out[cell] *= rho[(cell / stride) % static_cast<std::size_t>(G)];
  }
  return GriddedDensity::normalized(k, G, std::move(out));
}

GriddedDensity coarsen(const GriddedDensity& rho, int resolution) {
  require(rho.axes() == 1, ErrorKind::shape, "coarsen expects a one-axis density");
  require(resolution >= 1 && rho.resolution() % resolution == 0, ErrorKind::shape,
          "coarsen: target resolution must divide " + std::to_string(rho.resolution()));
  const int factor = rho.resolution() / resolution;
  std::vector<double> out(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    ExactSum s;
    for (int j = 0; j < factor; ++j) s.add(rho[static_cast<std::size_t>(i * factor + j)]);
    out[static_cast<std::size_t>(i)] = s.value() / factor;
  }
  return GriddedDensity::normalized(1, resolution, std::move(out));
}

// ---------------------------------------------------------------------------
// Serialization

std::string density_to_json(const GriddedDensity& rho) {
  nlohmann::json j;
  j["axes"] = rho.axes();
  j["resolution"] = rho.resolution();
  j["values"] = std::vector<double>(rho.values().begin(), rho.values().end());
  return j.dump();
}

GriddedDensity density_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    return GriddedDensity(j.at("axes").get<int>(), j.at("resolution").get<int>(),
                          j.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("density JSON: ") + e.what());
  }
}

namespace {

void write_le_doubles(std::ostream& os, std::span<const double> values) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (double v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
      os.write(buf, 8);
    }
  }
}

std::vector<double> read_le_doubles(std::istream& is, std::size_t count) {
  std::vector<double> out(count);
  std::vector<unsigned char> raw(count * 8);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  require(static_cast<std::size_t>(is.gcount()) == raw.size(), ErrorKind::io, "truncated raw float64 block");
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[i * 8 + static_cast<std::size_t>(b)]) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace

void write_density_raw(const GriddedDensity& rho, const std::filesystem::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto sidecar = stem;
  sidecar += ".json";
  {
    std::ofstream os(bin, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::io, "cannot open " + bin.string());
    write_le_doubles(os, rho.values());
  }
  nlohmann::json j;
  j["axes"] = rho.axes();
  j["resolution"] = rho.resolution();
  j["format"] = "f64le";
  j["count"] = rho.size();
  j["data"] = bin.filename().string();
  std::ofstream os(sidecar);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open " + sidecar.string());
  os << j.dump(2) << '\n';
}

GriddedDensity read_density_raw(const std::filesystem::path& sidecar) {
  std::ifstream is(sidecar);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open " + sidecar.string());
  nlohmann::json j;
  try {
    is >> j;
    require(j.at("format").get<std::string>() == "f64le", ErrorKind::io, "unsupported raw format");
    const auto bin = sidecar.parent_path() / j.at("data").get<std::string>();
    std::ifstream bs(bin, std::ios::binary);
    require(static_cast<bool>(bs), ErrorKind::io, "cannot open " + bin.string());
    auto values = read_le_doubles(bs, j.at("count").get<std::size_t>());
    return GriddedDensity(j.at("axes").get<int>(), j.at("resolution").get<int>(), std::move(values));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, std::string("density sidecar: ") + e.what());
  }
}

std::filesystem::path save_density(const GriddedDensity& rho, const std::filesystem::path& stem) {
  auto json_path = stem;
  json_path += ".json";
  if (rho.size() <= kJsonCellLimit) {
    std::ofstream os(json_path);
    require(static_cast<bool>(os), ErrorKind::io, "cannot open " + json_path.string());
    os << density_to_json(rho) << '\n';
  } else {
    write_density_raw(rho, stem);
  }
  return json_path;
}

GriddedDensity load_density(const std::filesystem::path& json_path) {
  std::ifstream is(json_path);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open " + json_path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  const auto text = ss.str();
  const auto j = nlohmann::json::parse(text, nullptr, false);
  require(!j.is_discarded(), ErrorKind::io, "malformed JSON in " + json_path.string());
  if (j.contains("format")) return read_density_raw(json_path);
  return density_from_json(text);
}

}  // namespace chaoslab
