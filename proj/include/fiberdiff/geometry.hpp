#pragma once

// Base manifolds of the fiber bundles: plane curves, space curves and
// surfaces described only through their curvature fields on uniform grids.

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fiberdiff::geometry {

/// Uniform cell-centred grid on [0, length]: point(i) = (i + 1/2) * spacing.
/// A periodic grid identifies 0 with length.
struct Grid1D {
  double length = 1.0;
  int n = 1;
  bool periodic = false;

  Grid1D() = default;
  Grid1D(double length, int n, bool periodic);

  double spacing() const noexcept { return length / n; }
  double point(int i) const noexcept { return (i + 0.5) * spacing(); }
  std::vector<double> points() const;
};

/// Scalar field over a 1D parameter, either analytic or sampled on a grid
/// (linear interpolation, periodic wrap or constant end extension).
class Field1D {
 public:
  Field1D() : f_([](double) { return 0.0; }), constant_(true) {}
  static Field1D constant(double value);
  static Field1D function(std::function<double(double)> f);
  static Field1D sampled(Grid1D grid, std::vector<double> values);

  double operator()(double u) const;
  bool is_sampled() const noexcept { return !samples_.empty(); }
  bool is_constant() const noexcept { return constant_; }

 private:
  std::function<double(double)> f_;
  Grid1D grid_;
  std::vector<double> samples_;
  bool constant_ = false;
};

/// Scalar field over a 2D parameter grid, analytic or bilinearly sampled.
class Field2D {
 public:
  Field2D() : f_([](double, double) { return 0.0; }) {}
  static Field2D constant(double value);
  static Field2D function(std::function<double(double, double)> f);
  /// values are row-major: index i * axis2.n + j.
  static Field2D sampled(Grid1D axis1, Grid1D axis2, std::vector<double> values);

  double operator()(double u1, double u2) const;

 private:
  std::function<double(double, double)> f_;
  Grid1D axis1_, axis2_;
  std::vector<double> samples_;
};

/// Plane curve parameterized by arc length with signed curvature kappa(u);
/// the normal N makes (T, N) positively oriented.
struct PlaneCurve {
  Grid1D grid;
  Field1D kappa;

  PlaneCurve(Grid1D grid, Field1D kappa);
  double length() const noexcept { return grid.length; }
  bool periodic() const noexcept { return grid.periodic; }
};

/// Space curve with Frenet curvature kappa >= 0 and torsion tau. The torsion
/// is carried along but no tube quantity depends on it.
struct SpaceCurve {
  Grid1D grid;
  Field1D kappa;
  Field1D tau;

  SpaceCurve(Grid1D grid, Field1D kappa, Field1D tau);
  double length() const noexcept { return grid.length; }
  bool periodic() const noexcept { return grid.periodic; }
};

/// Surface on a parameter grid (u1, u2) whose coordinate lines are lines of
/// curvature: d/du1 is along T1 and d/du2 along T2. scale1, scale2 are the
/// lengths |d/du1|, |d/du2|, so the area element is scale1 * scale2 du1 du2.
struct SurfaceSpec {
  Grid1D axis1;
  Grid1D axis2;
  Field2D kappa1;
  Field2D kappa2;
  Field2D scale1 = Field2D::constant(1.0);
  Field2D scale2 = Field2D::constant(1.0);
  /// False when the grid axes are not principal directions; the surface
  /// solver refuses such surfaces.
  bool principal_aligned = true;
  std::array<std::string, 2> axis_names{"u1", "u2"};

  double area_weight(double u1, double u2) const { return scale1(u1, u2) * scale2(u1, u2); }
  bool umbilic(double u1, double u2, double tol = 0.0) const;
  /// Throws InvariantViolation on non-finite curvature at a grid point.
  void validate() const;
};

/// Circle of radius R traversed counterclockwise: kappa = 1/R, L = 2 pi R.
PlaneCurve make_circle(double R, int samples = 256);
/// Straight segment of length L (kappa = 0, open).
PlaneCurve make_segment(double L, int samples = 256);

/// Torus with tube radius r and centre-line radius R over (theta, phi),
/// theta running along the meridians. With normal_sign = +1 this uses
/// kappa1 = -1/r, kappa2 = -cos(theta) / (R + r cos(theta)).
/// normal_sign = -1 flips the normal and both curvatures.
SurfaceSpec make_torus(double r, double R, int n_theta = 128, int n_phi = 128,
                       double normal_sign = 1.0);

/// Sphere of radius r over polar angle theta in [0, pi] and azimuth phi;
/// kappa1 = kappa2 = normal_sign / r.
SurfaceSpec make_sphere(double r, int n_theta = 64, int n_phi = 128,
                        double normal_sign = 1.0);

/// Cylinder over a plane curve: S = C x [0, z_extent] with principal
/// curvatures kappa(s) and 0.
SurfaceSpec make_lined_surface(const PlaneCurve& c, double z_extent, int n_z = 64);

/// kappa1 = H + sqrt(H^2 - K), kappa2 = H - sqrt(H^2 - K). A negative
/// discriminant within tol is treated as an umbilic.
std::pair<double, double> principal_from_gauss_mean(double K, double H,
                                                    double tol = 1e-12);

/// Arc-length reparameterized curve with finite-difference curvature (and
/// torsion in 3D), resampled on a uniform grid of `points.size()` cells.
/// Derivatives use 5-point stencils in the chord-length parameter.
PlaneCurve plane_curve_from_points(std::span<const std::array<double, 2>> points,
                                   bool closed);
SpaceCurve space_curve_from_points(std::span<const std::array<double, 3>> points,
                                   bool closed);

using AnyCurve = std::variant<PlaneCurve, SpaceCurve>;

struct PointSet {
  int dim = 2;
  std::vector<std::array<double, 3>> points;
};

/// Dispatches on the point dimension (2 -> PlaneCurve, 3 -> SpaceCurve).
AnyCurve curvature_from_samples(const PointSet& pts, bool closed);

/// CSV with header row x,y or x,y,z.
PointSet read_points_csv(const std::string& path);

}  // namespace fiberdiff::geometry
