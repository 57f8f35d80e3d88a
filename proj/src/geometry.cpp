#include "fiberdiff/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "fiberdiff/errors.hpp"

namespace fiberdiff::geometry {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Locates u between cell centres: returns lower index and fraction.
std::pair<int, double> bracket(const Grid1D& g, double u) {
  const double s = u / g.spacing() - 0.5;
  if (g.periodic) {
    const double fl = std::floor(s);
    int i = static_cast<int>(fl) % g.n;
    if (i < 0) i += g.n;
    return {i, s - fl};
  }
  if (g.n == 1 || s <= 0.0) return {0, 0.0};
  if (s >= g.n - 1) return {g.n - 2, 1.0};
  const double fl = std::floor(s);
  return {static_cast<int>(fl), s - fl};
}

int wrap_next(const Grid1D& g, int i) { return g.periodic ? (i + 1) % g.n : std::min(i + 1, g.n - 1); }

// Fornberg's recursion: weights c[k][j] for the k-th derivative at x0 from
// values at nodes x[j], k = 0..m.
std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> x, int m) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(static_cast<std::size_t>(m + 1),
                                     std::vector<double>(static_cast<std::size_t>(n + 1), 0.0));
  auto C = [&](int k, int j) -> double& {
    return c[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
  };
  double c1 = 1.0, c4 = x[0] - x0;
  C(0, 0) = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[static_cast<std::size_t>(i)] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          C(k, i) = c1 * (k * C(k - 1, i - 1) - c5 * C(k, i - 1)) / c2;
        C(0, i) = -c1 * c5 * C(0, i - 1) / c2;
      }
      for (int k = mn; k >= 1; --k) C(k, j) = (c4 * C(k, j) - k * C(k - 1, j)) / c3;
      C(0, j) = c4 * C(0, j) / c3;
    }
    c1 = c2;
  }
  return c;
}

template <std::size_t D>
double dist(const std::array<double, D>& a, const std::array<double, D>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < D; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// Derivatives 1..3 of each coordinate at every sample, in the chord-length
// parameter, plus the cumulative parameter values and total length.
template <std::size_t D>
struct SampledDerivatives {
  std::vector<double> t;  // parameter at each sample
  double length = 0.0;
  std::vector<std::array<std::array<double, D>, 3>> d;  // d[i][order-1][coord]
};

template <std::size_t D>
SampledDerivatives<D> differentiate(std::span<const std::array<double, D>> p, bool closed) {
  const int n = static_cast<int>(p.size());
  if (n < 5) throw std::invalid_argument("curve sampling needs at least 5 points");
  SampledDerivatives<D> out;
  out.t.resize(static_cast<std::size_t>(n));
  std::vector<double> seg(static_cast<std::size_t>(n), 0.0);  // seg[i] = |p[i+1]-p[i]|
  const double tiny = 1e-14;
  for (int i = 0; i < n; ++i) {
    if (!closed && i == n - 1) break;
    const auto& a = p[static_cast<std::size_t>(i)];
    const auto& b = p[static_cast<std::size_t>((i + 1) % n)];
    seg[static_cast<std::size_t>(i)] = dist(a, b);
  }
  double scale = 0.0;
  for (double s : seg) scale = std::max(scale, s);
  for (int i = 0; i < (closed ? n : n - 1); ++i)
    if (!(seg[static_cast<std::size_t>(i)] > tiny * std::max(1.0, scale)))
      throw std::invalid_argument("repeated consecutive points in curve samples");
  for (int i = 1; i < n; ++i)
    out.t[static_cast<std::size_t>(i)] = out.t[static_cast<std::size_t>(i - 1)] + seg[static_cast<std::size_t>(i - 1)];
  out.length = out.t.back() + (closed ? seg.back() : 0.0);

  out.d.resize(static_cast<std::size_t>(n));
  std::array<double, 5> xs{};
  std::array<int, 5> idx{};
  for (int i = 0; i < n; ++i) {
    if (closed) {
      // Offsets accumulated through the wrap keep the stencil monotone.
      for (int k = -2; k <= 2; ++k) idx[static_cast<std::size_t>(k + 2)] = ((i + k) % n + n) % n;
      xs[2] = 0.0;
      for (int k = 1; k <= 2; ++k) {
        xs[static_cast<std::size_t>(2 + k)] = xs[static_cast<std::size_t>(1 + k)] + seg[static_cast<std::size_t>(idx[static_cast<std::size_t>(1 + k)])];
        xs[static_cast<std::size_t>(2 - k)] = xs[static_cast<std::size_t>(3 - k)] - seg[static_cast<std::size_t>(idx[static_cast<std::size_t>(2 - k)])];
      }
    } else {
      const int start = std::clamp(i - 2, 0, n - 5);
      for (int k = 0; k < 5; ++k) {
        idx[static_cast<std::size_t>(k)] = start + k;
        xs[static_cast<std::size_t>(k)] = out.t[static_cast<std::size_t>(start + k)] - out.t[static_cast<std::size_t>(i)];
      }
    }
    const auto w = fd_weights(0.0, xs, 3);
    for (int order = 1; order <= 3; ++order)
      for (std::size_t c = 0; c < D; ++c) {
        double s = 0.0;
        for (int k = 0; k < 5; ++k)
          s += w[static_cast<std::size_t>(order)][static_cast<std::size_t>(k)] *
               p[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])][c];
        out.d[static_cast<std::size_t>(i)][static_cast<std::size_t>(order - 1)][c] = s;
      }
  }
  return out;
}

// Resamples node values (at parameters t, possibly nonuniform) onto the
// cell centres of a uniform grid by linear interpolation.
std::vector<double> resample(const std::vector<double>& t, const std::vector<double>& v,
                             const Grid1D& g) {
  const int n = static_cast<int>(t.size());
  std::vector<double> out(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) {
    const double u = g.point(i);
    auto it = std::upper_bound(t.begin(), t.end(), u);
    int hi = static_cast<int>(it - t.begin());
    double tl, th, vl, vh;
    if (hi == 0) {
      if (g.periodic) {
        tl = t[static_cast<std::size_t>(n - 1)] - g.length;
        vl = v[static_cast<std::size_t>(n - 1)];
        th = t[0];
        vh = v[0];
      } else {
        out[static_cast<std::size_t>(i)] = v[0];
        continue;
      }
    } else if (hi == n) {
      if (g.periodic) {
        tl = t[static_cast<std::size_t>(n - 1)];
        vl = v[static_cast<std::size_t>(n - 1)];
        th = g.length;
        vh = v[0];
      } else {
        out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(n - 1)];
        continue;
      }
    } else {
      tl = t[static_cast<std::size_t>(hi - 1)];
      th = t[static_cast<std::size_t>(hi)];
      vl = v[static_cast<std::size_t>(hi - 1)];
      vh = v[static_cast<std::size_t>(hi)];
    }
    const double f = (u - tl) / (th - tl);
    out[static_cast<std::size_t>(i)] = vl + f * (vh - vl);
  }
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace

Grid1D::Grid1D(double length_, int n_, bool periodic_)
    : length(length_), n(n_), periodic(periodic_) {
  if (!(length > 0.0) || !std::isfinite(length))
    throw std::invalid_argument("grid length must be positive");
  if (n < 1) throw std::invalid_argument("grid needs at least one cell");
}

std::vector<double> Grid1D::points() const {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = point(i);
  return out;
}

Field1D Field1D::constant(double value) {
  Field1D f = function([value](double) { return value; });
  f.constant_ = true;
  return f;
}

Field1D Field1D::function(std::function<double(double)> fn) {
  Field1D f;
  f.f_ = std::move(fn);
  f.samples_.clear();
  f.constant_ = false;
  return f;
}

Field1D Field1D::sampled(Grid1D grid, std::vector<double> values) {
  if (static_cast<int>(values.size()) != grid.n)
    throw std::invalid_argument("sample count does not match grid");
  Field1D f;
  f.f_ = nullptr;
  f.grid_ = grid;
  f.samples_ = std::move(values);
  f.constant_ = false;
  return f;
}

double Field1D::operator()(double u) const {
  if (samples_.empty()) return f_(u);
  const auto [i, frac] = bracket(grid_, u);
  const double a = samples_[static_cast<std::size_t>(i)];
  const double b = samples_[static_cast<std::size_t>(wrap_next(grid_, i))];
  return a + frac * (b - a);
}

Field2D Field2D::constant(double value) {
  return function([value](double, double) { return value; });
}

Field2D Field2D::function(std::function<double(double, double)> fn) {
  Field2D f;
  f.f_ = std::move(fn);
  f.samples_.clear();
  return f;
}

Field2D Field2D::sampled(Grid1D axis1, Grid1D axis2, std::vector<double> values) {
  if (values.size() != static_cast<std::size_t>(axis1.n) * static_cast<std::size_t>(axis2.n))
    throw std::invalid_argument("sample count does not match grid");
  Field2D f;
  f.f_ = nullptr;
  f.axis1_ = axis1;
  f.axis2_ = axis2;
  f.samples_ = std::move(values);
  return f;
}

double Field2D::operator()(double u1, double u2) const {
  if (samples_.empty()) return f_(u1, u2);
  const auto [i, fi] = bracket(axis1_, u1);
  const auto [j, fj] = bracket(axis2_, u2);
  const int i1 = wrap_next(axis1_, i), j1 = wrap_next(axis2_, j);
  auto at = [&](int a, int b) {
    return samples_[static_cast<std::size_t>(a) * static_cast<std::size_t>(axis2_.n) + static_cast<std::size_t>(b)];
  };
  return (1 - fi) * ((1 - fj) * at(i, j) + fj * at(i, j1)) +
         fi * ((1 - fj) * at(i1, j) + fj * at(i1, j1));
}

PlaneCurve::PlaneCurve(Grid1D g, Field1D k) : grid(g), kappa(std::move(k)) {
  for (int i = 0; i < grid.n; ++i)
    if (!std::isfinite(kappa(grid.point(i))))
      throw InvariantViolation("non-finite curvature", "u=" + std::to_string(grid.point(i)));
}

SpaceCurve::SpaceCurve(Grid1D g, Field1D k, Field1D t)
    : grid(g), kappa(std::move(k)), tau(std::move(t)) {
  for (int i = 0; i < grid.n; ++i) {
    const double u = grid.point(i);
    const double kv = kappa(u), tv = tau(u);
    if (!std::isfinite(kv) || !std::isfinite(tv))
      throw InvariantViolation("non-finite curvature or torsion", "s=" + std::to_string(u));
    if (kv < 0.0)
      throw InvariantViolation("Frenet curvature must be non-negative", "s=" + std::to_string(u));
  }
}

bool SurfaceSpec::umbilic(double u1, double u2, double tol) const {
  return std::abs(kappa1(u1, u2) - kappa2(u1, u2)) <= tol;
}

void SurfaceSpec::validate() const {
  for (int i = 0; i < axis1.n; ++i)
    for (int j = 0; j < axis2.n; ++j) {
      const double u1 = axis1.point(i), u2 = axis2.point(j);
      if (!std::isfinite(kappa1(u1, u2)) || !std::isfinite(kappa2(u1, u2)))
        throw InvariantViolation("non-finite principal curvature",
                                 axis_names[0] + "=" + std::to_string(u1) + ", " +
                                     axis_names[1] + "=" + std::to_string(u2));
      if (!(area_weight(u1, u2) > 0.0))
        throw InvariantViolation("non-positive area element",
                                 axis_names[0] + "=" + std::to_string(u1) + ", " +
                                     axis_names[1] + "=" + std::to_string(u2));
    }
}

PlaneCurve make_circle(double R, int samples) {
  if (!(R > 0.0)) throw std::invalid_argument("circle radius must be positive");
  return PlaneCurve(Grid1D(kTwoPi * R, samples, true), Field1D::constant(1.0 / R));
}

PlaneCurve make_segment(double L, int samples) {
  return PlaneCurve(Grid1D(L, samples, false), Field1D::constant(0.0));
}

SurfaceSpec make_torus(double r, double R, int n_theta, int n_phi, double normal_sign) {
  if (!(r > 0.0)) throw std::invalid_argument("torus tube radius must be positive");
  if (!(R > r)) throw std::invalid_argument("torus requires R > r (no self-intersection)");
  SurfaceSpec s;
  s.axis1 = Grid1D(kTwoPi, n_theta, true);
  s.axis2 = Grid1D(kTwoPi, n_phi, true);
  s.kappa1 = Field2D::constant(-normal_sign / r);
  s.kappa2 = Field2D::function([=](double theta, double) {
    return -normal_sign * std::cos(theta) / (R + r * std::cos(theta));
  });
  s.scale1 = Field2D::constant(r);
  s.scale2 = Field2D::function([=](double theta, double) { return R + r * std::cos(theta); });
  s.axis_names = {"theta", "phi"};
  s.validate();
  return s;
}

SurfaceSpec make_sphere(double r, int n_theta, int n_phi, double normal_sign) {
  if (!(r > 0.0)) throw std::invalid_argument("sphere radius must be positive");
  SurfaceSpec s;
  s.axis1 = Grid1D(std::numbers::pi, n_theta, false);
  s.axis2 = Grid1D(kTwoPi, n_phi, true);
  s.kappa1 = Field2D::constant(normal_sign / r);
  s.kappa2 = Field2D::constant(normal_sign / r);
  s.scale1 = Field2D::constant(r);
  s.scale2 = Field2D::function([=](double theta, double) { return r * std::sin(theta); });
  s.axis_names = {"theta", "phi"};
  s.validate();
  return s;
}

SurfaceSpec make_lined_surface(const PlaneCurve& c, double z_extent, int n_z) {
  if (!(z_extent > 0.0)) throw std::invalid_argument("z extent must be positive");
  SurfaceSpec s;
  s.axis1 = c.grid;
  s.axis2 = Grid1D(z_extent, n_z, false);
  s.kappa1 = Field2D::function([k = c.kappa](double u, double) { return k(u); });
  s.kappa2 = Field2D::constant(0.0);
  s.axis_names = {"s", "z"};
  s.validate();
  return s;
}

std::pair<double, double> principal_from_gauss_mean(double K, double H, double tol) {
  double disc = H * H - K;
  if (disc < -tol)
    throw std::domain_error("H^2 < K: principal curvatures are not real");
  disc = std::max(disc, 0.0);
  const double root = std::sqrt(disc);
  return {H + root, H - root};
}

PlaneCurve plane_curve_from_points(std::span<const std::array<double, 2>> points, bool closed) {
  const auto d = differentiate<2>(points, closed);
  const std::size_t n = points.size();
  std::vector<double> kappa(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r1 = d.d[i][0];
    const auto& r2 = d.d[i][1];
    const double speed = std::hypot(r1[0], r1[1]);
    kappa[i] = (r1[0] * r2[1] - r1[1] * r2[0]) / (speed * speed * speed);
  }
  Grid1D g(d.length, static_cast<int>(n), closed);
  return PlaneCurve(g, Field1D::sampled(g, resample(d.t, kappa, g)));
}

SpaceCurve space_curve_from_points(std::span<const std::array<double, 3>> points, bool closed) {
  const auto d = differentiate<3>(points, closed);
  const std::size_t n = points.size();
  std::vector<double> kappa(n), tau(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = d.d[i][0];
    const auto& b = d.d[i][1];
    const auto& c = d.d[i][2];
    const std::array<double, 3> x{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                                  a[0] * b[1] - a[1] * b[0]};
    const double speed = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    const double cross2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    kappa[i] = std::sqrt(cross2) / (speed * speed * speed);
    // Torsion is undefined where the curve is straight; report 0 there.
    const double floor = 1e-20 * std::pow(speed, 6);
    tau[i] = cross2 > floor ? (x[0] * c[0] + x[1] * c[1] + x[2] * c[2]) / cross2 : 0.0;
  }
  Grid1D g(d.length, static_cast<int>(n), closed);
  auto k = resample(d.t, kappa, g);
  for (double& v : k) v = std::max(v, 0.0);
  return SpaceCurve(g, Field1D::sampled(g, std::move(k)), Field1D::sampled(g, resample(d.t, tau, g)));
}

AnyCurve curvature_from_samples(const PointSet& pts, bool closed) {
  if (pts.dim == 2) {
    std::vector<std::array<double, 2>> p;
    p.reserve(pts.points.size());
    for (const auto& q : pts.points) p.push_back({q[0], q[1]});
    return plane_curve_from_points(p, closed);
  }
  if (pts.dim == 3) return space_curve_from_points(pts.points, closed);
  throw std::invalid_argument("points must be 2D or 3D");
}

PointSet read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string tok;
    while (std::getline(hs, tok, ',')) header.push_back(trim(tok));
  }
  PointSet ps;
  if (header == std::vector<std::string>{"x", "y"})
    ps.dim = 2;
  else if (header == std::vector<std::string>{"x", "y", "z"})
    ps.dim = 3;
  else
    throw std::invalid_argument(path + ": header must be 'x,y' or 'x,y,z'");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::array<double, 3> p{0.0, 0.0, 0.0};
    int k = 0;
    while (std::getline(ls, tok, ',')) {
      if (k >= ps.dim) throw std::invalid_argument(path + ": too many columns on line " + std::to_string(lineno));
      std::size_t used = 0;
      const std::string t = trim(tok);
      try {
        p[static_cast<std::size_t>(k)] = std::stod(t, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != t.size())
        throw std::invalid_argument(path + ": bad number on line " + std::to_string(lineno));
      ++k;
    }
    if (k != ps.dim) throw std::invalid_argument(path + ": too few columns on line " + std::to_string(lineno));
    ps.points.push_back(p);
  }
  return ps;
}

}  // namespace fiberdiff::geometry
