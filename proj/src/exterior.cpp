#include "fiberdiff/exterior.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fiberdiff::exterior {

namespace {

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim)
    throw std::invalid_argument("frame dimension must be in 1..3, got " +
                                std::to_string(dim));
}

void require_same_dim(int a, int b) {
  if (a != b)
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a) +
                                " vs " + std::to_string(b));
}

// Sign of the shuffle that sorts (A, B) when A and B are disjoint: one flip
// per pair (i in A, j in B) with i > j.
double shuffle_sign(IndexMask a, IndexMask b) {
  int flips = 0;
  for (int j = 0; j < kMaxDim; ++j) {
    if (!(b & (1u << j))) continue;
    flips += std::popcount(static_cast<unsigned>(a >> (j + 1)));
  }
  return (flips % 2 == 0) ? 1.0 : -1.0;
}

}  // namespace

DiagMetric::DiagMetric(std::span<const double> diag)
    : dim_(static_cast<int>(diag.size())) {
  check_dim(dim_);
  for (std::size_t i = 0; i < diag.size(); ++i) {
    if (!(diag[i] > 0.0) || !std::isfinite(diag[i]))
      throw std::invalid_argument("metric diagonal entries must be positive");
    diag_[i] = diag[i];
  }
}

DiagMetric DiagMetric::identity(int dim) {
  check_dim(dim);
  const std::array<double, kMaxDim> ones{1.0, 1.0, 1.0};
  return DiagMetric(std::span<const double>(ones.data(), static_cast<std::size_t>(dim)));
}

double DiagMetric::det() const noexcept {
  double d = 1.0;
  for (int i = 0; i < dim_; ++i) d *= diag_[static_cast<std::size_t>(i)];
  return d;
}

double DiagMetric::sqrt_det() const { return std::sqrt(det()); }

FrameVector::FrameVector(std::span<const double> coeffs)
    : dim_(static_cast<int>(coeffs.size())) {
  check_dim(dim_);
  std::copy(coeffs.begin(), coeffs.end(), c_.begin());
}

IndexMask mask_of(std::span<const int> indices, int dim) {
  IndexMask m = 0;
  int prev = -1;
  for (int i : indices) {
    if (i <= prev || i >= dim)
      throw std::invalid_argument(
          "index tuple must be strictly increasing and within the frame");
    m |= static_cast<IndexMask>(1u << i);
    prev = i;
  }
  return m;
}

std::vector<int> indices_of(IndexMask mask) {
  std::vector<int> out;
  for (int i = 0; i < kMaxDim; ++i)
    if (mask & (1u << i)) out.push_back(i);
  return out;
}

FrameForm::FrameForm(int dim, int degree) : dim_(dim), degree_(degree) {
  check_dim(dim);
  if (degree < 0 || degree > dim)
    throw std::invalid_argument("form degree must be in 0..dim");
}

FrameForm FrameForm::monomial(int dim, std::initializer_list<int> indices,
                              double value) {
  FrameForm f(dim, static_cast<int>(indices.size()));
  f.set(indices, value);
  return f;
}

FrameForm FrameForm::one_form(std::span<const double> coeffs) {
  FrameForm f(static_cast<int>(coeffs.size()), 1);
  for (std::size_t i = 0; i < coeffs.size(); ++i) f.c_[1u << i] = coeffs[i];
  return f;
}

FrameForm FrameForm::scalar(int dim, double value) {
  FrameForm f(dim, 0);
  f.c_[0] = value;
  return f;
}

double FrameForm::coeff(std::span<const int> indices) const {
  if (static_cast<int>(indices.size()) != degree_)
    throw std::invalid_argument("index tuple length differs from form degree");
  return c_[mask_of(indices, dim_)];
}

void FrameForm::set(std::span<const int> indices, double value) {
  if (static_cast<int>(indices.size()) != degree_)
    throw std::invalid_argument("index tuple length differs from form degree");
  c_[mask_of(indices, dim_)] = value;
}

void FrameForm::set_by_mask(IndexMask m, double value) {
  if (m >= (1u << dim_) || std::popcount(static_cast<unsigned>(m)) != degree_)
    throw std::invalid_argument("mask does not match form degree");
  c_[m] = value;
}

const std::vector<IndexMask>& FrameForm::basis() const {
  // Lexicographic order of the sorted tuples, per (dim, degree).
  static const auto tables = [] {
    std::array<std::array<std::vector<IndexMask>, kMaxDim + 1>, kMaxDim + 1> t;
    for (int n = 1; n <= kMaxDim; ++n) {
      for (unsigned m = 0; m < (1u << n); ++m)
        t[static_cast<std::size_t>(n)][static_cast<std::size_t>(std::popcount(m))]
            .push_back(static_cast<IndexMask>(m));
      for (auto& list : t[static_cast<std::size_t>(n)])
        std::sort(list.begin(), list.end(), [](IndexMask a, IndexMask b) {
          return indices_of(a) < indices_of(b);
        });
    }
    return t;
  }();
  return tables[static_cast<std::size_t>(dim_)][static_cast<std::size_t>(degree_)];
}

std::vector<std::pair<std::vector<int>, double>> FrameForm::terms() const {
  std::vector<std::pair<std::vector<int>, double>> out;
  for (IndexMask m : basis())
    if (c_[m] != 0.0) out.emplace_back(indices_of(m), c_[m]);
  return out;
}

FrameForm& FrameForm::operator+=(const FrameForm& other) {
  require_same_dim(dim_, other.dim_);
  if (degree_ != other.degree_)
    throw std::invalid_argument("cannot add forms of different degree");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += other.c_[i];
  return *this;
}

FrameForm& FrameForm::operator*=(double s) {
  for (double& x : c_) x *= s;
  return *this;
}

double FrameForm::distance(const FrameForm& other) const {
  require_same_dim(dim_, other.dim_);
  if (degree_ != other.degree_)
    throw std::invalid_argument("cannot compare forms of different degree");
  double d = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i)
    d = std::max(d, std::abs(c_[i] - other.c_[i]));
  return d;
}

FrameForm flat(const FrameVector& v, const DiagMetric& g) {
  require_same_dim(v.dim(), g.dim());
  FrameForm out(g.dim(), 1);
  for (int i = 0; i < g.dim(); ++i)
    out.set_by_mask(static_cast<IndexMask>(1u << i), g(i) * v[i]);
  return out;
}

FrameVector sharp(const FrameForm& alpha, const DiagMetric& g) {
  require_same_dim(alpha.dim(), g.dim());
  if (alpha.degree() != 1)
    throw std::invalid_argument("sharp expects a 1-form");
  std::array<double, kMaxDim> c{};
  for (int i = 0; i < g.dim(); ++i)
    c[static_cast<std::size_t>(i)] =
        alpha.coeff_by_mask(static_cast<IndexMask>(1u << i)) * g.inverse(i);
  return FrameVector(std::span<const double>(c.data(), static_cast<std::size_t>(g.dim())));
}

FrameForm hodge(const FrameForm& omega, const DiagMetric& g) {
  require_same_dim(omega.dim(), g.dim());
  const int n = g.dim();
  const auto full = static_cast<IndexMask>((1u << n) - 1u);
  const double root = g.sqrt_det();
  FrameForm out(n, n - omega.degree());
  for (IndexMask m : omega.basis()) {
    const double a = omega.coeff_by_mask(m);
    if (a == 0.0) continue;
    double scale = root;
    for (int i : indices_of(m)) scale *= g.inverse(i);
    const auto complement = static_cast<IndexMask>(full & ~m);
    out.set_by_mask(complement, a * scale * shuffle_sign(m, complement));
  }
  return out;
}

FrameForm wedge(const FrameForm& a, const FrameForm& b) {
  require_same_dim(a.dim(), b.dim());
  if (a.degree() + b.degree() > a.dim())
    throw std::invalid_argument("wedge degree exceeds the frame dimension");
  FrameForm out(a.dim(), a.degree() + b.degree());
  for (IndexMask ma : a.basis()) {
    const double ca = a.coeff_by_mask(ma);
    if (ca == 0.0) continue;
    for (IndexMask mb : b.basis()) {
      if (ma & mb) continue;
      const double cb = b.coeff_by_mask(mb);
      if (cb == 0.0) continue;
      const auto m = static_cast<IndexMask>(ma | mb);
      out.set_by_mask(m, out.coeff_by_mask(m) + shuffle_sign(ma, mb) * ca * cb);
    }
  }
  return out;
}

double inner(const FrameForm& a, const FrameForm& b, const DiagMetric& g) {
  require_same_dim(a.dim(), g.dim());
  require_same_dim(b.dim(), g.dim());
  if (a.degree() != b.degree())
    throw std::invalid_argument("inner product needs forms of equal degree");
  double s = 0.0;
  for (IndexMask m : a.basis()) {
    double w = a.coeff_by_mask(m) * b.coeff_by_mask(m);
    for (int i : indices_of(m)) w *= g.inverse(i);
    s += w;
  }
  return s;
}

FrameForm volume_form(const DiagMetric& g) {
  FrameForm mu(g.dim(), g.dim());
  mu.set_by_mask(static_cast<IndexMask>((1u << g.dim()) - 1u), g.sqrt_det());
  return mu;
}

}  // namespace fiberdiff::exterior
