#pragma once

// Frame-based exterior algebra for diagonal metrics in dimension <= 3.
//
// Forms are written in a dual frame X^0..X^{n-1} (0-based indices). A
// monomial X^{i1} ^ ... ^ X^{il} with i1 < ... < il is addressed by its
// index tuple; internally the tuple is a bitmask, so a form of any degree
// is a dense array of 2^n slots of which only the degree-l ones are used.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace fiberdiff::exterior {

inline constexpr int kMaxDim = 3;

/// Metric g_ij = diag(g_00, ..., g_{n-1,n-1}) in a chosen frame.
class DiagMetric {
 public:
  explicit DiagMetric(std::span<const double> diag);
  DiagMetric(std::initializer_list<double> diag)
      : DiagMetric(std::span<const double>(diag.begin(), diag.size())) {}

  static DiagMetric identity(int dim);

  int dim() const noexcept { return dim_; }
  double operator()(int i) const { return diag_[static_cast<std::size_t>(i)]; }
  /// g^ii
  double inverse(int i) const { return 1.0 / diag_[static_cast<std::size_t>(i)]; }
  double det() const noexcept;
  double sqrt_det() const;

 private:
  std::array<double, kMaxDim> diag_{};
  int dim_ = 0;
};

/// Components a^i of a vector field in the frame X_0..X_{n-1}.
class FrameVector {
 public:
  explicit FrameVector(std::span<const double> coeffs);
  FrameVector(std::initializer_list<double> coeffs)
      : FrameVector(std::span<const double>(coeffs.begin(), coeffs.size())) {}

  int dim() const noexcept { return dim_; }
  double operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return c_[static_cast<std::size_t>(i)]; }

 private:
  std::array<double, kMaxDim> c_{};
  int dim_ = 0;
};

using IndexMask = std::uint8_t;

/// Bitmask of a strictly increasing index tuple; throws on bad tuples.
IndexMask mask_of(std::span<const int> indices, int dim);
std::vector<int> indices_of(IndexMask mask);

/// A homogeneous l-form on an n-dimensional frame.
class FrameForm {
 public:
  FrameForm(int dim, int degree);

  /// The monomial X^{i1} ^ ... ^ X^{il}, with coefficient `value`.
  static FrameForm monomial(int dim, std::initializer_list<int> indices,
                            double value = 1.0);
  /// The 1-form sum_i c_i X^i.
  static FrameForm one_form(std::span<const double> coeffs);
  static FrameForm one_form(std::initializer_list<double> coeffs) {
    return one_form(std::span<const double>(coeffs.begin(), coeffs.size()));
  }
  static FrameForm scalar(int dim, double value);

  int dim() const noexcept { return dim_; }
  int degree() const noexcept { return degree_; }

  double coeff(std::span<const int> indices) const;
  double coeff(std::initializer_list<int> indices) const {
    return coeff(std::span<const int>(indices.begin(), indices.size()));
  }
  void set(std::span<const int> indices, double value);
  void set(std::initializer_list<int> indices, double value) {
    set(std::span<const int>(indices.begin(), indices.size()), value);
  }

  double coeff_by_mask(IndexMask m) const { return c_[m]; }
  void set_by_mask(IndexMask m, double value);

  /// Index tuples (as masks) of this degree, in lexicographic order.
  const std::vector<IndexMask>& basis() const;
  /// Nonzero terms as (sorted index tuple, coefficient).
  std::vector<std::pair<std::vector<int>, double>> terms() const;

  FrameForm& operator+=(const FrameForm& other);
  FrameForm& operator*=(double s);
  friend FrameForm operator+(FrameForm a, const FrameForm& b) { return a += b; }
  friend FrameForm operator*(double s, FrameForm a) { return a *= s; }

  /// Max-norm distance between coefficient arrays of equal shape.
  double distance(const FrameForm& other) const;

 private:
  std::array<double, 1u << kMaxDim> c_{};
  int dim_ = 0;
  int degree_ = 0;
};

/// X^flat: a_i = g_ii a^i.
FrameForm flat(const FrameVector& v, const DiagMetric& g);

/// alpha^sharp: alpha^i = alpha_i / g_ii.
FrameVector sharp(const FrameForm& alpha, const DiagMetric& g);

/// Hodge star of an l-form, giving an (n-l)-form. For a monomial X^I with
/// complement J, *X^I = sqrt(det g) prod_{i in I} g^ii sgn(I,J) X^J, which
/// reduces to *X^i = sqrt(det g) g^ii (-1)^i iota_i(X^0 ^ ... ^ X^{n-1}) on
/// 1-forms (0-based), *1 = mu and *mu = 1.
FrameForm hodge(const FrameForm& omega, const DiagMetric& g);

FrameForm wedge(const FrameForm& a, const FrameForm& b);

/// Pointwise inner product <omega, eta> induced by g on l-forms.
double inner(const FrameForm& a, const FrameForm& b, const DiagMetric& g);

/// mu = sqrt(det g) X^0 ^ ... ^ X^{n-1}.
FrameForm volume_form(const DiagMetric& g);

}  // namespace fiberdiff::exterior
