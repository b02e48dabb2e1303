#pragma once

// Periodic geometry on T^d = [0,1)^d and gridded densities on (T^1)^m.
//
// Grids are uniform with G cells per axis and mesh h = 1/G; cell i covers
// [i h, (i+1) h) and its representative point is the centre (i + 1/2) h.
// Values are stored row-major with axis 0 varying slowest, so the first k
// axes of an m-axis grid form contiguous blocks of G^(m-k) cells.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/error.hpp"

namespace chaoslab {

inline constexpr std::size_t kDefaultCellBudget = std::size_t{1} << 24;

// Canonical representative of x modulo 1, in [0,1).
double wrap(double x) noexcept;

class TorusVector {
 public:
  TorusVector() = default;
  std::span<const double> coords() const noexcept { return coords_; }
  std::size_t size() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const noexcept { return coords_[i]; }

 private:
  friend TorusVector wrap_point(std::span<const double> x);
  std::vector<double> coords_;
};

TorusVector wrap_point(std::span<const double> x);

std::size_t checked_cell_count(int axes, int resolution,
                               std::size_t budget = kDefaultCellBudget);

// A plain periodic grid function (no sign or mass constraints).
struct GridFunction {
  int axes = 1;
  int resolution = 0;
  std::vector<double> values;

  double mesh() const noexcept { return 1.0 / resolution; }
  std::size_t size() const noexcept { return values.size(); }
};

class GriddedDensity {
 public:
  static constexpr double kMassTolerance = 1e-10;

  // Validates nonnegativity and h^m * sum = 1 within kMassTolerance.
  GriddedDensity(int axes, int resolution, std::vector<double> values);

  // Rescales nonnegative values to unit mass.
  static GriddedDensity normalized(int axes, int resolution, std::vector<double> values);
  static GriddedDensity uniform(int axes, int resolution);

  int axes() const noexcept { return axes_; }
  int resolution() const noexcept { return resolution_; }
  double mesh() const noexcept { return 1.0 / resolution_; }
  double cell_volume() const noexcept;
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double mass() const noexcept;
  double min_value() const noexcept;

  GridFunction as_function() const { return {axes_, resolution_, values_}; }

 private:
  struct Unchecked {};
  GriddedDensity(Unchecked, int axes, int resolution, std::vector<double> values)
      : axes_(axes), resolution_(resolution), values_(std::move(values)) {}

  int axes_;
  int resolution_;
  std::vector<double> values_;
};

// Sample f at cell centres (point values).
template <class F>
GridFunction sample_on_grid(int resolution, F&& f, double offset = 0.5) {
  GridFunction g{1, resolution, std::vector<double>(static_cast<std::size_t>(resolution))};
  const double h = 1.0 / resolution;
  for (int i = 0; i < resolution; ++i) g.values[static_cast<std::size_t>(i)] = f((i + offset) * h);
  return g;
}

// Cell averages of a one-dimensional density (5-point Gauss-Legendre per
// cell), normalized.
template <class F>
GriddedDensity cell_average_density(int resolution, F&& f) {
  static constexpr double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                      0.5384693101056831, 0.9061798459386640};
  static constexpr double weights[5] = {0.2369268850561891, 0.4786286704993665,
                                        0.5688888888888889, 0.4786286704993665,
                                        0.2369268850561891};
  const double h = 1.0 / resolution;
  std::vector<double> v(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    double acc = 0.0;
    for (int q = 0; q < 5; ++q) acc += weights[q] * f((i + 0.5 + 0.5 * nodes[q]) * h);
    v[static_cast<std::size_t>(i)] = 0.5 * acc;
  }
  return GriddedDensity::normalized(1, resolution, std::move(v));
}

// output(i) = h * sum_j f((i - j) mod G) rho(j) on T^1.
GridFunction circular_convolve(const GridFunction& f, const GriddedDensity& rho);

// Same contraction for a kernel given as a callable on the torus:
// output(i) = h * sum_j kernel(x_i^out - x_j) rho(j), with x_i^out = (i + out_offset) h.
template <class F>
GridFunction circular_convolve_kernel(F&& kernel, const GriddedDensity& rho, double out_offset);

// Central differences with periodic indices, one component per axis:
// result[a * size + cell] = d/dx_a at that cell.
struct GradientField {
  int axes = 1;
  int resolution = 0;
  std::vector<double> components;

  std::span<const double> axis(int a) const noexcept {
    const std::size_t n = components.size() / static_cast<std::size_t>(axes);
    return std::span<const double>(components).subspan(static_cast<std::size_t>(a) * n, n);
  }
};

GradientField periodic_gradient(const GridFunction& f);
GradientField periodic_gradient(const GriddedDensity& rho);

// Keep the first k axes; sums the trailing axes with weight h^(m-k).
GriddedDensity marginalize(const GriddedDensity& rho, int keep);

// k-fold tensor power of a one-axis density.
GriddedDensity product_density(const GriddedDensity& rho, int k,
                               std::size_t budget = kDefaultCellBudget);

// Cell-aggregate a one-axis density onto a coarser grid whose resolution
// divides the input resolution.
GriddedDensity coarsen(const GriddedDensity& rho, int resolution);

// Serialization. Small grids: a single JSON document
// {"axes": m, "resolution": G, "values": [...]}. Large grids: raw
// little-endian float64 values in `<stem>.bin` plus a `<stem>.json` sidecar
// {"axes", "resolution", "format": "f64le", "count", "data": "<stem>.bin"}.
inline constexpr std::size_t kJsonCellLimit = 4096;

std::string density_to_json(const GriddedDensity& rho);
GriddedDensity density_from_json(const std::string& text);
void write_density_raw(const GriddedDensity& rho, const std::filesystem::path& stem);
GriddedDensity read_density_raw(const std::filesystem::path& sidecar);
// Chooses JSON or raw+sidecar by size; returns the path of the JSON file written.
std::filesystem::path save_density(const GriddedDensity& rho, const std::filesystem::path& stem);
GriddedDensity load_density(const std::filesystem::path& json_path);

// ---------------------------------------------------------------------------

template <class F>
GridFunction circular_convolve_kernel(F&& kernel, const GriddedDensity& rho, double out_offset) {
  require(rho.axes() == 1, ErrorKind::shape, "circular_convolve_kernel expects a one-axis density");
  const int G = rho.resolution();
  const double h = rho.mesh();
  // Sample the kernel once at every lattice difference.
  std::vector<double> table(static_cast<std::size_t>(G));
  for (int m = 0; m < G; ++m) table[static_cast<std::size_t>(m)] = kernel(wrap((m + out_offset - 0.5) * h));
  GridFunction f{1, G, std::move(table)};
  return circular_convolve(f, rho);
}

}  // namespace chaoslab
