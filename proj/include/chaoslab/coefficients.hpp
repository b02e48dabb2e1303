#pragma once

// Model fields on T^d: pairwise drift b, confinement diffusion a1, pairwise
// diffusion a2, their divergences, the combined drift b_hat = b - div a2, and
// the certified constants lambda1 (ellipticity) and eta (oscillation of a2).
//
// Matrix divergence convention: (div a)_i = sum_j d/dx_j a_ij.

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "chaoslab/error.hpp"

namespace chaoslab {

inline constexpr int kMaxDim = 3;

using SymMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

// One Fourier mode: value(x) += cos(2 pi k.x) * cos_coef + sin(2 pi k.x) * sin_coef.
struct TrigMode {
  std::array<int, kMaxDim> wave{};
  std::vector<double> cos_coef;  // rows * cols, row-major
  std::vector<double> sin_coef;
};

// A finite trigonometric series with vector (cols == 1) or matrix values.
class TrigField {
 public:
  TrigField() = default;
  TrigField(int dim, int rows, int cols);

  int dim() const noexcept { return dim_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::span<const double> constant() const noexcept { return constant_; }
  std::span<const TrigMode> modes() const noexcept { return modes_; }

  TrigField& set_constant(std::vector<double> c);
  TrigField& add_mode(std::array<int, kMaxDim> wave, std::vector<double> cos_coef,
                      std::vector<double> sin_coef);

  // out has rows * cols entries.
  void evaluate(std::span<const double> x, std::span<double> out) const;

  // Matrix -> vector divergence, or vector -> scalar (1x1) divergence.
  TrigField divergence() const;
  // Componentwise partial derivative along one axis.
  TrigField partial(int axis) const;
  TrigField operator-(const TrigField& other) const;
  TrigField operator+(const TrigField& other) const;
  TrigField scaled(double s) const;

  // sup over the torus of the entrywise max, bounded by summing |coefficients|.
  double sup_bound() const;
  // Lipschitz bound (per entry, in the max norm over x-displacements).
  double lipschitz_bound() const;

 private:
  int dim_ = 1;
  int rows_ = 1;
  int cols_ = 1;
  std::vector<double> constant_;
  std::vector<TrigMode> modes_;
};

// A field either as a trigonometric series (closed-form derivatives, fast
// pairwise sums) or as an arbitrary callable.
class Field {
 public:
  using Callable = std::function<void(std::span<const double>, std::span<double>)>;

  Field() = default;
  explicit Field(TrigField series);
  Field(int dim, int rows, int cols, Callable fn);

  int dim() const noexcept { return dim_; }
  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  bool has_series() const noexcept { return series_.has_value(); }
  const TrigField& series() const { return *series_; }

  void evaluate(std::span<const double> x, std::span<double> out) const;
  double scalar(double x) const;  // d = 1, 1x1 fields

 private:
  int dim_ = 1;
  int rows_ = 1;
  int cols_ = 1;
  std::optional<TrigField> series_;
  Callable fn_;
};

// Fourth-order central differences with step kFdStep; the divergence of a
// matrix field evaluated at x.
inline constexpr double kFdStep = 1.0 / 1024.0;
void fd_divergence(const Field& matrix_field, std::span<const double> x, std::span<double> out);

struct Certificate {
  double lambda1 = 0.0;
  double eta = 0.0;
  bool condition_iv_holds = false;
  int grid = 0;
  // Filled when Lipschitz bounds are known: lambda1 - L1 * r, eta + L2 * 2r with
  // r the covering radius of the certification grid.
  std::optional<double> lambda1_lower;
  std::optional<double> eta_upper;

  std::string to_json() const;
};

struct FieldValues {
  SmallVector b, div_a1, div_a2, b_hat;
  SymMatrix a1, a2;
  bool analytic_div_a1 = true;
  bool analytic_div_a2 = true;
};

struct PresetParams {
  // perturbed_constant
  double alpha0 = 1.0, alpha1 = 0.0, c2 = 0.1, eps_a = 0.02, beta0 = 0.5;
  double eps_offdiag = 0.0;  // d >= 2: a2_01 = a2_10 = eps_offdiag cos(2 pi (x0 + x1))
  // zero_interaction
  double a1 = 1.0;
};

class CoefficientSet {
 public:
  // Fields b (vector), a1 and a2 (symmetric matrices). Divergences come from
  // the series when present, otherwise from finite differences.
  CoefficientSet(int dim, Field b, Field a1, Field a2, std::string name = "custom");

  int dim() const noexcept { return dim_; }
  const std::string& name() const noexcept { return name_; }
  const Field& b() const noexcept { return b_; }
  const Field& a1() const noexcept { return a1_; }
  const Field& a2() const noexcept { return a2_; }
  const Field& div_a1() const noexcept { return div_a1_; }
  const Field& div_a2() const noexcept { return div_a2_; }
  const Field& b_hat() const noexcept { return b_hat_; }
  bool analytic_div_a1() const noexcept { return analytic_div_a1_; }
  bool analytic_div_a2() const noexcept { return analytic_div_a2_; }
  // True when b, a1, a2 are all trigonometric series.
  bool all_series() const noexcept { return b_.has_series() && a1_.has_series() && a2_.has_series(); }

  const std::optional<Certificate>& certificate() const noexcept { return certificate_; }
  void attach_certificate(Certificate c) { certificate_ = c; }
  double lambda1() const;
  double eta() const;

  // sup over the torus of |b_hat| (vector max norm) and of the spectral norm of
  // a2, estimated on a grid with `resolution` points per axis (series: exact bound
  // is min of the grid value plus Lipschitz slack and the coefficient sum).
  double sup_b_hat(int resolution = 512) const;
  double sup_a2(int resolution = 512) const;
  // Upper bound for the largest eigenvalue of a1(x) + a2(y) over the torus.
  double max_diffusion(int resolution = 512) const;

  // Parameter record for reproducibility (preset name + values).
  std::string description;

 private:
  int dim_;
  std::string name_;
  Field b_, a1_, a2_, div_a1_, div_a2_, b_hat_;
  bool analytic_div_a1_ = true;
  bool analytic_div_a2_ = true;
  std::optional<Certificate> certificate_;
};

// Presets: "perturbed_constant", "landau_like", "zero_interaction". The
// returned set carries its certificate (grid 256 in d = 1, coarser above).
CoefficientSet build_preset(const std::string& name, const PresetParams& params, int dim = 1);

int default_certification_grid(int dim);

// lambda1 = min over grid pairs of the smallest eigenvalue of a1(v1) + a2(v1 - v2);
// eta = max over grid pairs of ||a2(x) - a2(z)||_2 (spectral norm).
Certificate certify(const CoefficientSet& cs, int resolution,
                    std::optional<double> lipschitz_a1 = std::nullopt,
                    std::optional<double> lipschitz_a2 = std::nullopt);

// a1(v_i) + (1/N) sum_j a2(v_i - v_j); positions are N x d row-major.
// include_self selects whether the j = i term is part of the sum.
SymMatrix effective_diffusion(const CoefficientSet& cs, std::span<const double> positions, int i,
                              bool include_self = true);

// Symmetric square root by spectral decomposition. Eigenvalues in
// [-kSpdFloor * scale, 0) are clamped to zero; anything more negative throws.
inline constexpr double kSpdFloor = 1e-12;
SymMatrix sqrt_spd(const SymMatrix& a);

FieldValues evaluate_fields(const CoefficientSet& cs, std::span<const double> x);

}  // namespace chaoslab
