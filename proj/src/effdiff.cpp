#include "fiberdiff/effdiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "fiberdiff/errors.hpp"
#include "fiberdiff/quadrature.hpp"

namespace fiberdiff::effdiff {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinLift = 1e-12;

std::string where(const BundleSpec& b, BasePoint p) {
  std::ostringstream os;
  os.precision(17);
  if (const auto* s = std::get_if<SurfaceSlab>(&b.family))
    os << s->surface.axis_names[0] << "=" << p.u1 << ", " << s->surface.axis_names[1] << "=" << p.u2;
  else
    os << "u=" << p.u1;
  return os.str();
}

// G(a) = (arctanh(a)/a - 1) / a^2 = sum_{k>=1} a^(2k-2) / (2k+1).
double arctanh_tail(double a) {
  const double a2 = a * a;
  if (std::abs(a) < 0.1) {
    double s = 0.0, p = 1.0;
    for (int k = 1; k <= 12; ++k) {
      s += p / (2.0 * k + 1.0);
      p *= a2;
    }
    return s;
  }
  return (std::atanh(a) / a - 1.0) / a2;
}

void require_lift(double kappa_extent, const char* what) {
  if (!(1.0 - std::abs(kappa_extent) > kMinLift) || !std::isfinite(kappa_extent))
    throw InvariantViolation(std::string(what) + ": metric factor vanishes on the fiber");
}

quadrature::Rule fiber_rule(const LocalFiber& f, int n) {
  if (f.kind == FiberKind::interval) return quadrature::gauss_legendre(n, -0.5 * f.size, 0.5 * f.size);
  return quadrature::periodic_trapezoid(n);
}

// Evaluates `eval(rule)` at successive doublings of the base order until the
// relative change drops below the tolerance.
template <class Eval>
std::vector<double> converge(const LocalFiber& f, const QuadratureSettings& q, Eval eval) {
  const bool interval = f.kind == FiberKind::interval;
  int n = interval ? q.interval_order : q.circle_points;
  const int n_max = interval ? q.max_interval_order : q.max_circle_points;
  if (n < (interval ? 4 : 16)) throw std::invalid_argument("quadrature order too small");
  std::vector<double> prev = eval(fiber_rule(f, n));
  for (;;) {
    n *= 2;
    if (n > n_max)
      throw QuadratureError("fiber quadrature did not converge up to order " + std::to_string(n_max));
    std::vector<double> cur = eval(fiber_rule(f, n));
    bool done = true;
    for (std::size_t k = 0; k < cur.size(); ++k)
      if (std::abs(cur[k] - prev[k]) > q.tolerance * std::max(std::abs(cur[k]), 1e-300)) done = false;
    if (done) return cur;
    prev = std::move(cur);
  }
}

// pi_* of a total-space form whose fiber coordinate is the last frame index:
// keeps the terms containing the fiber covector and drops it.
exterior::FrameForm push_forward(const exterior::FrameForm& omega, int base_dim) {
  exterior::FrameForm out(base_dim, omega.degree() - 1);
  const auto fiber_bit = static_cast<exterior::IndexMask>(1u << base_dim);
  for (exterior::IndexMask m : omega.basis())
    if (m & fiber_bit)
      out.set_by_mask(static_cast<exterior::IndexMask>(m & ~fiber_bit), omega.coeff_by_mask(m));
  return out;
}

void check_nodes(const LocalFiber& f, const quadrature::Rule& rule) {
  for (double x : rule.nodes)
    for (int i = 0; i < f.base_dim; ++i)
      if (!(f.lift(i, x) > kMinLift))
        throw InvariantViolation("metric factor <= 1e-12 at fiber node " + std::to_string(x));
}

}  // namespace

LocalFiber LocalFiber::channel(double kappa, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("channel width must be positive");
  return LocalFiber{1, FiberKind::interval, w, {kappa, 0.0}};
}

LocalFiber LocalFiber::slab(double kappa1, double kappa2, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("slab width must be positive");
  return LocalFiber{2, FiberKind::interval, w, {kappa1, kappa2}};
}

LocalFiber LocalFiber::tube(double kappa, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("tube radius must be positive");
  return LocalFiber{1, FiberKind::circle, r, {kappa, 0.0}};
}

double LocalFiber::lift(int i, double x) const {
  const double k = kappa[static_cast<std::size_t>(i)];
  return kind == FiberKind::interval ? 1.0 - k * x : 1.0 - k * size * std::cos(x);
}

exterior::DiagMetric LocalFiber::metric(double x) const {
  std::array<double, 3> d{};
  for (int i = 0; i < base_dim; ++i) {
    const double l = lift(i, x);
    d[static_cast<std::size_t>(i)] = l * l;
  }
  d[static_cast<std::size_t>(base_dim)] = kind == FiberKind::interval ? 1.0 : size * size;
  return exterior::DiagMetric(std::span<const double>(d.data(), static_cast<std::size_t>(base_dim + 1)));
}

double LocalFiber::min_lift() const {
  const double reach = kind == FiberKind::interval ? 0.5 * size : size;
  double m = 1.0;
  for (int i = 0; i < base_dim; ++i)
    m = std::min(m, 1.0 - std::abs(kappa[static_cast<std::size_t>(i)]) * reach);
  return m;
}

void BundleSpec::validate() const {
  if (!(D0 > 0.0) || !std::isfinite(D0)) throw InvariantViolation("D0 must be positive");
  std::visit(
      [&](const auto& fam) {
        using T = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<T, SurfaceSlab>) {
          if (!(fam.w > 0.0)) throw InvariantViolation("slab width must be positive");
          fam.surface.validate();
          for (int i = 0; i < fam.surface.axis1.n; ++i)
            for (int j = 0; j < fam.surface.axis2.n; ++j) {
              const BasePoint p{fam.surface.axis1.point(i), fam.surface.axis2.point(j)};
              if (!(local_fiber(*this, p).min_lift() > kMinLift))
                throw InvariantViolation("|kappa_i| w/2 >= 1 (slab self-intersects)", where(*this, p));
            }
        } else {
          const auto& grid = fam.curve.grid;
          if constexpr (std::is_same_v<T, PlanarChannel>) {
            if (!(fam.w > 0.0)) throw InvariantViolation("channel width must be positive");
          } else {
            if (!(fam.r > 0.0)) throw InvariantViolation("tube radius must be positive");
          }
          for (int i = 0; i < grid.n; ++i) {
            const BasePoint p{grid.point(i), 0.0};
            if (!(local_fiber(*this, p).min_lift() > kMinLift))
              throw InvariantViolation(std::is_same_v<T, PlanarChannel>
                                           ? "|kappa| w/2 >= 1 (channel self-intersects)"
                                           : "|kappa| r >= 1 (tube self-intersects)",
                                       where(*this, p));
          }
        }
      },
      family);
}

LocalFiber local_fiber(const BundleSpec& b, BasePoint p) {
  return std::visit(
      [&](const auto& fam) -> LocalFiber {
        using T = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<T, PlanarChannel>)
          return LocalFiber::channel(fam.curve.kappa(p.u1), fam.w);
        else if constexpr (std::is_same_v<T, SurfaceSlab>)
          return LocalFiber::slab(fam.surface.kappa1(p.u1, p.u2), fam.surface.kappa2(p.u1, p.u2), fam.w);
        else
          return LocalFiber::tube(fam.curve.kappa(p.u1), fam.r);
      },
      b.family);
}

double fiber_sigma(const LocalFiber& f, const QuadratureSettings& q) {
  if (!(f.min_lift() > kMinLift)) throw InvariantViolation("metric factor vanishes on the fiber");
  const int m = f.base_dim;
  const auto full = static_cast<exterior::IndexMask>((1u << m) - 1u);
  const auto v = converge(f, q, [&](const quadrature::Rule& rule) {
    check_nodes(f, rule);
    exterior::FrameForm acc(m + 1, m + 1);
    for (std::size_t k = 0; k < rule.nodes.size(); ++k)
      acc += rule.weights[k] * exterior::volume_form(f.metric(rule.nodes[k]));
    // mu_M is X^0 ^ ... ^ X^{m-1} in the orthonormal base frame.
    return std::vector<double>{push_forward(acc, m).coeff_by_mask(full)};
  });
  return v[0];
}

std::vector<double> fiber_effective_D(const LocalFiber& f, double D0, const QuadratureSettings& q) {
  if (!(D0 > 0.0)) throw std::invalid_argument("D0 must be positive");
  const double sigma = fiber_sigma(f, q);
  const int m = f.base_dim;
  const auto base_metric = exterior::DiagMetric::identity(m);
  const double sign = (m % 2 == 1) ? 1.0 : -1.0;  // (-1)^(m-1)
  return converge(f, q, [&](const quadrature::Rule& rule) {
    check_nodes(f, rule);
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      std::array<double, 3> e{};
      e[static_cast<std::size_t>(i)] = 1.0;
      const auto alpha = exterior::flat(exterior::FrameVector(std::span<const double>(e.data(), static_cast<std::size_t>(m))), base_metric);
      // Pullback: the lifted coframe has the same coefficients, zero along the fiber.
      exterior::FrameForm lifted(m + 1, 1);
      for (int k = 0; k < m; ++k)
        lifted.set_by_mask(static_cast<exterior::IndexMask>(1u << k),
                           alpha.coeff_by_mask(static_cast<exterior::IndexMask>(1u << k)));
      exterior::FrameForm acc(m + 1, m);
      for (std::size_t k = 0; k < rule.nodes.size(); ++k)
        acc += rule.weights[k] * exterior::hodge(lifted, f.metric(rule.nodes[k]));
      const auto image = exterior::sharp(exterior::hodge(push_forward(acc, m), base_metric), base_metric);
      out[static_cast<std::size_t>(i)] = sign * (D0 / sigma) * image[i];
    }
    return out;
  });
}

double sigma_quadrature(const BundleSpec& b, BasePoint p) {
  try {
    return fiber_sigma(local_fiber(b, p), b.quadrature);
  } catch (const InvariantViolation& e) {
    throw InvariantViolation(e.what(), where(b, p));
  }
}

std::vector<double> effective_D_quadrature(const BundleSpec& b, BasePoint p) {
  try {
    return fiber_effective_D(local_fiber(b, p), b.D0, b.quadrature);
  } catch (const InvariantViolation& e) {
    throw InvariantViolation(e.what(), where(b, p));
  }
}

double channel_D_closed(double D0, double w, double kappa) {
  const double a = 0.5 * kappa * w;
  require_lift(a, "channel");
  return D0 * (1.0 + a * a * arctanh_tail(a));
}

std::array<double, 2> surface_D_closed(double D0, double w, double kappa1, double kappa2) {
  require_lift(0.5 * kappa1 * w, "slab");
  require_lift(0.5 * kappa2 * w, "slab");
  // integral of (1 - kb v)/(1 - ka v) over the fiber, divided by w, equals
  // 1 + (w^2/4) ka (ka - kb) G(ka w/2); algebraically the same as
  // (ka kb w + 2 (ka - kb) arctanh(ka w/2)) / (ka^2 w).
  const double q = 0.25 * w * w;
  const double denom = 1.0 + kappa1 * kappa2 * w * w / 12.0;
  if (kappa1 == kappa2) {
    const double d = D0 / denom;
    return {d, d};
  }
  const double i1 = 1.0 + q * kappa1 * (kappa1 - kappa2) * arctanh_tail(0.5 * kappa1 * w);
  const double i2 = 1.0 + q * kappa2 * (kappa2 - kappa1) * arctanh_tail(0.5 * kappa2 * w);
  return {D0 * i1 / denom, D0 * i2 / denom};
}

double surface_D1_as_printed(double D0, double w, double kappa1, double kappa2) {
  if (kappa1 == 0.0) throw std::invalid_argument("printed formula is singular at kappa1 = 0");
  return D0 * (w * kappa1 * kappa2 + 2.0 * (kappa2 - kappa1) * std::atanh(0.5 * kappa1 * w)) /
         (kappa1 * kappa1 * w * (1.0 + kappa1 * kappa2 * w * w / 12.0));
}

double slab_sigma_closed(double w, double kappa1, double kappa2) {
  return w * (1.0 + kappa1 * kappa2 * w * w / 12.0);
}

double tube_D_closed(double D0, double r, double kappa) {
  const double x = r * kappa;
  require_lift(x, "tube");
  return D0 / std::sqrt((1.0 - x) * (1.0 + x));
}

double tube_D_intermediate(double D0, double r, double kappa) {
  const double x = r * kappa;
  require_lift(x, "tube");
  return D0 / (1.0 + x) * std::sqrt(2.0 / (1.0 - x) - 1.0);
}

double ogawa_truncation(double D0, double w, double kappa, int n_terms) {
  if (n_terms < 1) throw std::invalid_argument("n_terms must be >= 1");
  const double a2 = 0.25 * kappa * kappa * w * w;
  double s = 0.0, p = 1.0;
  for (int j = 0; j < n_terms; ++j) {
    s += p / (2.0 * j + 1.0);
    p *= a2;
  }
  return D0 * s;
}

EffectiveField effective_field(const BundleSpec& b, bool check_quadrature) {
  b.validate();
  EffectiveField out;
  out.D0 = b.D0;
  auto rel = [](double x, double ref) { return std::abs(x - ref) / std::abs(ref); };

  std::visit(
      [&](const auto& fam) {
        using T = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<T, SurfaceSlab>) {
          const auto& s = fam.surface;
          out.base_dim = 2;
          out.axis1 = s.axis1;
          out.axis2 = s.axis2;
          out.axis_names = s.axis_names;
          out.frame_labels = {"T1", "T2"};
          out.principal_aligned = s.principal_aligned;
        } else {
          out.base_dim = 1;
          out.axis1 = fam.curve.grid;
          out.axis_names = {std::is_same_v<T, TubeSurface> ? "s" : "u", ""};
          out.frame_labels = {"T", ""};
        }
      },
      b.family);

  const std::size_t total = static_cast<std::size_t>(out.n1()) * static_cast<std::size_t>(out.n2());
  out.sigma.resize(total);
  out.D1.resize(total);
  out.scale1.assign(total, 1.0);
  out.scale2.assign(total, 1.0);
  if (out.base_dim == 2) out.D2.resize(total);
  if (check_quadrature) out.quadrature_discrepancy.resize(total);

  for (int i = 0; i < out.n1(); ++i)
    for (int j = 0; j < out.n2(); ++j) {
      const BasePoint p{out.axis1.point(i), out.axis2 ? out.axis2->point(j) : 0.0};
      const std::size_t k = out.index(i, j);
      try {
        std::visit(
            [&](const auto& fam) {
              using T = std::decay_t<decltype(fam)>;
              if constexpr (std::is_same_v<T, PlanarChannel>) {
                out.sigma[k] = fam.w;
                out.D1[k] = channel_D_closed(b.D0, fam.w, fam.curve.kappa(p.u1));
              } else if constexpr (std::is_same_v<T, SurfaceSlab>) {
                const double k1 = fam.surface.kappa1(p.u1, p.u2), k2 = fam.surface.kappa2(p.u1, p.u2);
                out.sigma[k] = slab_sigma_closed(fam.w, k1, k2);
                const auto d = surface_D_closed(b.D0, fam.w, k1, k2);
                out.D1[k] = d[0];
                out.D2[k] = d[1];
                out.scale1[k] = fam.surface.scale1(p.u1, p.u2);
                out.scale2[k] = fam.surface.scale2(p.u1, p.u2);
              } else {
                out.sigma[k] = kTwoPi * fam.r;
                out.D1[k] = tube_D_closed(b.D0, fam.r, fam.curve.kappa(p.u1));
              }
            },
            b.family);
        if (!(out.sigma[k] > 0.0) || !(out.D1[k] > 0.0) || (out.base_dim == 2 && !(out.D2[k] > 0.0)))
          throw InvariantViolation("non-positive sigma or eigenvalue");
        if (check_quadrature) {
          const LocalFiber f = local_fiber(b, p);
          double d = rel(fiber_sigma(f, b.quadrature), out.sigma[k]);
          const auto dq = fiber_effective_D(f, b.D0, b.quadrature);
          d = std::max(d, rel(dq[0], out.D1[k]));
          if (out.base_dim == 2) d = std::max(d, rel(dq[1], out.D2[k]));
          out.quadrature_discrepancy[k] = d;
        }
      } catch (const InvariantViolation& e) {
        if (!e.location().empty()) throw;
        throw InvariantViolation(e.what(), where(b, p));
      }
    }
  return out;
}

Reparameterization::Reparameterization(const geometry::Grid1D& grid, std::vector<double> sigma)
    : grid_(grid), sigma_(std::move(sigma)) {
  if (static_cast<int>(sigma_.size()) != grid_.n)
    throw std::invalid_argument("sigma samples do not match the curve grid");
  for (std::size_t i = 0; i < sigma_.size(); ++i)
    if (!(sigma_[i] > 0.0) || !std::isfinite(sigma_[i]))
      throw InvariantViolation("sigma must be positive", "u=" + std::to_string(grid_.point(static_cast<int>(i))));
  const double edge = grid_.periodic ? 0.5 * (sigma_.front() + sigma_.back()) : sigma_.front();
  const double edge_end = grid_.periodic ? edge : sigma_.back();
  knots_.push_back(0.0);
  knot_sigma_.push_back(edge);
  for (int i = 0; i < grid_.n; ++i) {
    knots_.push_back(grid_.point(i));
    knot_sigma_.push_back(sigma_[static_cast<std::size_t>(i)]);
  }
  knots_.push_back(grid_.length);
  knot_sigma_.push_back(edge_end);
  cumulative_.assign(knots_.size(), 0.0);
  for (std::size_t k = 1; k < knots_.size(); ++k)
    cumulative_[k] = cumulative_[k - 1] + 0.5 * (knots_[k] - knots_[k - 1]) * (knot_sigma_[k] + knot_sigma_[k - 1]);
}

std::size_t Reparameterization::segment(double u) const {
  const double tol = 1e-12 * grid_.length;
  if (u < -tol || u > grid_.length + tol) throw std::out_of_range("coordinate outside [0, L]");
  auto it = std::upper_bound(knots_.begin(), knots_.end(), u);
  std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - knots_.begin() - 1, 0));
  return std::min(k, knots_.size() - 2);
}

double Reparameterization::to_new(double u) const {
  const std::size_t k = segment(u);
  const double h = knots_[k + 1] - knots_[k], t = u - knots_[k];
  return cumulative_[k] + knot_sigma_[k] * t + (knot_sigma_[k + 1] - knot_sigma_[k]) * t * t / (2.0 * h);
}

double Reparameterization::derivative(double u) const {
  const std::size_t k = segment(u);
  const double h = knots_[k + 1] - knots_[k], t = u - knots_[k];
  return knot_sigma_[k] + (knot_sigma_[k + 1] - knot_sigma_[k]) * t / h;
}

double Reparameterization::to_old(double un) const {
  const double tol = 1e-12 * new_length();
  if (un < -tol || un > new_length() + tol) throw std::out_of_range("coordinate outside [0, L']");
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), un);
  std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cumulative_.begin() - 1, 0));
  k = std::min(k, knots_.size() - 2);
  const double h = knots_[k + 1] - knots_[k];
  const double s0 = knot_sigma_[k], slope = (knot_sigma_[k + 1] - s0) / h;
  const double delta = un - cumulative_[k];
  // Root of (slope/2) t^2 + s0 t - delta = 0 in the cancellation-free form.
  const double t = 2.0 * delta / (s0 + std::sqrt(std::max(s0 * s0 + 2.0 * slope * delta, 0.0)));
  return knots_[k] + t;
}

std::vector<double> Reparameterization::rescaled_sigma() const {
  std::vector<double> out(sigma_.size());
  for (int i = 0; i < grid_.n; ++i)
    out[static_cast<std::size_t>(i)] = sigma_[static_cast<std::size_t>(i)] / derivative(grid_.point(i));
  return out;
}

std::vector<std::pair<double, double>> Reparameterization::samples() const {
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < grid_.n; ++i) out.emplace_back(grid_.point(i), to_new(grid_.point(i)));
  return out;
}

Reparameterization rescale_metric_1d(const geometry::PlaneCurve& c, std::vector<double> sigma) {
  return Reparameterization(c.grid, std::move(sigma));
}

}  // namespace fiberdiff::effdiff
