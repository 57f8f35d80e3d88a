#pragma once

// Effective fiber volume sigma and effective diffusion endomorphism for the
// three bundle families: a planar channel of width w over a plane curve, a
// slab of thickness w over a surface and a tube of radius r around a space
// curve. Every family has a block-diagonal total-space metric in the lifted
// orthonormal base frame plus one fiber coordinate, which is what the
// quadrature route below relies on.

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fiberdiff/exterior.hpp"
#include "fiberdiff/geometry.hpp"

namespace fiberdiff::effdiff {

struct QuadratureSettings {
  int interval_order = 32;   ///< Gauss-Legendre order on interval fibers
  int circle_points = 256;   ///< trapezoid points on circle fibers
  int max_interval_order = 1024;
  int max_circle_points = 16384;
  double tolerance = 1e-13;  ///< relative change between successive doublings
};

struct PlanarChannel {
  geometry::PlaneCurve curve;
  double w;
};

struct SurfaceSlab {
  geometry::SurfaceSpec surface;
  double w;
};

struct TubeSurface {
  geometry::SpaceCurve curve;
  double r;
};

struct BundleSpec {
  std::variant<PlanarChannel, SurfaceSlab, TubeSurface> family;
  double D0 = 1.0;
  QuadratureSettings quadrature{};

  int base_dim() const noexcept { return std::holds_alternative<SurfaceSlab>(family) ? 2 : 1; }
  /// Checks sup |kappa_i| w/2 < 1 (sup |kappa| r < 1 for tubes) on the base
  /// grid; throws InvariantViolation naming the first offending point.
  void validate() const;
};

struct BasePoint {
  double u1 = 0.0;
  double u2 = 0.0;
};

enum class FiberKind { interval, circle };

/// The fiber over one base point: curvatures there and the fiber size.
/// Total-space metric in the lifted frame, fiber coordinate last:
///   channel  diag((1 - k v)^2, 1)                      v in [-w/2, w/2]
///   slab     diag((1 - k1 v)^2, (1 - k2 v)^2, 1)       v in [-w/2, w/2]
///   tube     diag((1 - k r cos t)^2, r^2)              t in [0, 2 pi)
struct LocalFiber {
  int base_dim = 1;
  FiberKind kind = FiberKind::interval;
  double size = 1.0;  ///< w for interval fibers, r for circle fibers
  std::array<double, 2> kappa{0.0, 0.0};

  static LocalFiber channel(double kappa, double w);
  static LocalFiber slab(double kappa1, double kappa2, double w);
  static LocalFiber tube(double kappa, double r);

  /// Lift factor 1 - k_i v (or 1 - k r cos t) for base direction i.
  double lift(int i, double fiber_coord) const;
  exterior::DiagMetric metric(double fiber_coord) const;
  /// Smallest lift factor over the closed fiber.
  double min_lift() const;
};

LocalFiber local_fiber(const BundleSpec& b, BasePoint p);

/// sigma = integral over the fiber of sqrt(det g).
double fiber_sigma(const LocalFiber& f, const QuadratureSettings& q = {});

/// Eigenvalues of the effective diffusion endomorphism along the base frame
/// directions, evaluated as (-1)^(m-1) (D0 / sigma) (sharp * pi_* * pullback
/// * flat) with each star taken in the pointwise fiber metric.
std::vector<double> fiber_effective_D(const LocalFiber& f, double D0,
                                      const QuadratureSettings& q = {});

double sigma_quadrature(const BundleSpec& b, BasePoint p);
std::vector<double> effective_D_quadrature(const BundleSpec& b, BasePoint p);

// Closed forms.

/// (2 D0 / (k w)) arctanh(k w / 2); series near k = 0.
double channel_D_closed(double D0, double w, double kappa);

/// Principal-direction eigenvalues of the slab:
///   D1 = D0 (w k1 k2 + 2 (k1 - k2) arctanh(k1 w/2)) / (k1^2 w (1 + k1 k2 w^2/12))
/// and D2 with k1, k2 swapped; series near k_i = 0.
std::array<double, 2> surface_D_closed(double D0, double w, double kappa1, double kappa2);

/// The slab D1 with the arctanh coefficient 2 (k2 - k1), as it appears in
/// the published formula. Kept only to demonstrate that it goes negative.
double surface_D1_as_printed(double D0, double w, double kappa1, double kappa2);

/// sigma of the slab, w (1 + k1 k2 w^2 / 12).
double slab_sigma_closed(double w, double kappa1, double kappa2);

/// D0 (1 - r^2 k^2)^(-1/2).
double tube_D_closed(double D0, double r, double kappa);

/// The tube value in its unsimplified form D0/(1 + r k) sqrt(2/(1 - r k) - 1).
double tube_D_intermediate(double D0, double r, double kappa);

/// D0 * sum_{j < n_terms} a^(2j) / (2j + 1), a = k w / 2: the truncated
/// arctanh series of channel_D_closed. n_terms = 2 gives D0 (1 + w^2 k^2/12).
double ogawa_truncation(double D0, double w, double kappa, int n_terms);

/// Per-point sigma and eigenvalues over the base grid.
struct EffectiveField {
  int base_dim = 1;
  geometry::Grid1D axis1;
  std::optional<geometry::Grid1D> axis2;
  std::array<std::string, 2> axis_names{"u", ""};
  std::array<std::string, 2> frame_labels{"T", ""};
  std::vector<double> sigma;
  std::vector<double> D1;
  std::vector<double> D2;      ///< empty for curve bases
  std::vector<double> scale1;  ///< |d/du1| at each point
  std::vector<double> scale2;  ///< |d/du2| (1 for curve bases)
  std::vector<double> quadrature_discrepancy;  ///< filled when checked
  bool principal_aligned = true;
  double D0 = 1.0;

  std::size_t size() const noexcept { return sigma.size(); }
  int n1() const noexcept { return axis1.n; }
  int n2() const noexcept { return axis2 ? axis2->n : 1; }
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n2()) + static_cast<std::size_t>(j);
  }
};

/// Assembles sigma and D from the closed forms at every grid point. With
/// check_quadrature, also records max relative closed/quadrature discrepancy
/// per point. Throws InvariantViolation with the location on failure.
EffectiveField effective_field(const BundleSpec& b, bool check_quadrature = false);

/// Coordinate u' with du' = sigma du on a curve base; in the new metric the
/// effective fiber volume is identically 1. sigma is given at the cell
/// centres of the curve grid and interpolated linearly.
class Reparameterization {
 public:
  Reparameterization(const geometry::Grid1D& grid, std::vector<double> sigma);

  double new_length() const noexcept { return cumulative_.back(); }
  double to_new(double u) const;
  double to_old(double u_new) const;
  /// du'/du, i.e. the interpolated sigma.
  double derivative(double u) const;
  /// sigma recomputed in the new coordinate at the grid points:
  /// sigma(u_i) / (du'/du)(u_i).
  std::vector<double> rescaled_sigma() const;
  /// The map sampled at the grid points, (u_i, u'_i).
  std::vector<std::pair<double, double>> samples() const;

 private:
  std::size_t segment(double u) const;

  geometry::Grid1D grid_;
  std::vector<double> sigma_;
  std::vector<double> knots_;       // 0, cell centres, L
  std::vector<double> knot_sigma_;  // interpolant values at knots
  std::vector<double> cumulative_;  // integral of sigma up to each knot
};

Reparameterization rescale_metric_1d(const geometry::PlaneCurve& c,
                                     std::vector<double> sigma);

}  // namespace fiberdiff::effdiff
