#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "fiberdiff/errors.hpp"
#include "fiberdiff/geometry.hpp"

using namespace fiberdiff::geometry;
using fiberdiff::InvariantViolation;
constexpr double pi = std::numbers::pi;

TEST_CASE("circles") {
  const auto c2 = make_circle(2.0);
  CHECK(c2.length() == doctest::Approx(4.0 * pi));
  CHECK(c2.kappa(1.234) == 0.5);
  CHECK(make_circle(1.0).kappa(0.0) == 1.0);
  const auto c10 = make_circle(10.0);
  CHECK(c10.periodic());
  CHECK(c10.kappa(3.0) == doctest::Approx(0.1));
  CHECK_THROWS_AS(make_circle(0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_circle(-1.0), std::invalid_argument);
}

TEST_CASE("torus curvatures") {
  const auto t = make_torus(1.0, 2.0);
  CHECK(t.kappa1(0.0, 0.0) == -1.0);
  CHECK(t.kappa2(0.0, 0.0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(t.kappa1(pi / 2, 0.3) == -1.0);
  CHECK(std::abs(t.kappa2(pi / 2, 0.3)) < 1e-16);
  CHECK(t.kappa2(pi, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  for (double th : {0.1, 0.7, 1.9, 3.0}) CHECK(t.kappa2(th, 0.0) == t.kappa2(-th, 0.0));
  CHECK(t.area_weight(0.0, 0.0) == doctest::Approx(3.0));
  CHECK(t.axis1.periodic);
  CHECK(t.axis2.periodic);
  CHECK_THROWS_AS(make_torus(2.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(make_torus(3.0, 2.0), std::invalid_argument);
  // The opposite normal flips both curvatures.
  const auto f = make_torus(1.0, 2.0, 16, 16, -1.0);
  CHECK(f.kappa1(0.0, 0.0) == 1.0);
  CHECK(f.kappa2(0.0, 0.0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("spheres are umbilic") {
  const auto s = make_sphere(1.0);
  CHECK(s.kappa1(0.4, 1.0) == 1.0);
  CHECK(s.kappa2(0.4, 1.0) == 1.0);
  const auto s2 = make_sphere(2.0);
  CHECK(s2.kappa1(1.0, 2.0) == 0.5);
  CHECK(s2.kappa2(1.0, 2.0) == 0.5);
  for (int i = 0; i < s.axis1.n; ++i)
    for (int j = 0; j < s.axis2.n; j += 7) CHECK(s.umbilic(s.axis1.point(i), s.axis2.point(j)));
  CHECK_THROWS_AS(make_sphere(0.0), std::invalid_argument);
}

TEST_CASE("lined surfaces") {
  const auto s = make_lined_surface(make_circle(1.0), 3.0);
  CHECK(s.kappa1(0.5, 1.0) == 1.0);
  CHECK(s.kappa2(0.5, 1.0) == 0.0);
  const auto wavy = PlaneCurve(Grid1D(5.0, 64, false), Field1D::function([](double u) { return 0.3 * std::sin(u); }));
  const auto sw = make_lined_surface(wavy, 1.0);
  for (double u : {0.1, 1.0, 2.5}) CHECK(sw.kappa2(u, 0.2) == 0.0);
  const auto flat = make_lined_surface(make_segment(2.0), 1.0);
  CHECK(flat.kappa1(1.0, 0.5) == 0.0);
  CHECK(flat.kappa2(1.0, 0.5) == 0.0);
}

TEST_CASE("principal curvatures from Gauss and mean curvature") {
  auto [a, b] = principal_from_gauss_mean(1.0, 1.0);
  CHECK(a == 1.0);
  CHECK(b == 1.0);
  std::tie(a, b) = principal_from_gauss_mean(0.0, 0.5);
  CHECK(a == doctest::Approx(1.0));
  CHECK(b == doctest::Approx(0.0));
  std::tie(a, b) = principal_from_gauss_mean(1.0 / 3.0, 2.0 / 3.0);
  CHECK(a == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(principal_from_gauss_mean(1.0, 0.5), std::domain_error);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const double k1 = d(rng), k2 = d(rng);
    const double K = k1 * k2, H = 0.5 * (k1 + k2);
    const auto [p, q] = principal_from_gauss_mean(K, H);
    REQUIRE(std::abs(p * q - K) < 1e-12 * std::max(1.0, std::abs(K)) + 1e-12);
    REQUIRE(std::abs(0.5 * (p + q) - H) < 1e-12);
  }
}

TEST_CASE("sampled fields interpolate linearly with periodic wrap") {
  const Grid1D g(4.0, 4, true);  // centres 0.5, 1.5, 2.5, 3.5
  const auto f = Field1D::sampled(g, {0.0, 1.0, 2.0, 3.0});
  CHECK(f(1.0) == doctest::Approx(0.5));
  CHECK(f(3.75) == doctest::Approx(3.0 - 0.25 * 3.0));
  CHECK(f(0.0) == doctest::Approx(1.5));
  const auto open = Field1D::sampled(Grid1D(4.0, 4, false), {0.0, 1.0, 2.0, 3.0});
  CHECK(open(0.1) == 0.0);
  CHECK(open(3.9) == 3.0);
  CHECK_THROWS_AS(Field1D::sampled(g, {1.0}), std::invalid_argument);
}

namespace {

std::vector<std::array<double, 2>> circle_points(int n, double R, double jitter) {
  std::vector<std::array<double, 2>> p;
  for (int k = 0; k < n; ++k) {
    const double s = 2 * pi * k / n;
    const double t = s + jitter * std::sin(s);  // monotone nonuniform sampling
    p.push_back({R * std::cos(t), R * std::sin(t)});
  }
  return p;
}

std::vector<std::array<double, 3>> helix_points(int n, double a, double b, double turns) {
  std::vector<std::array<double, 3>> p;
  for (int k = 0; k < n; ++k) {
    const double t = 2 * pi * turns * k / (n - 1);
    p.push_back({a * std::cos(t), a * std::sin(t), b * t});
  }
  return p;
}

double max_kappa_error(const PlaneCurve& c, double exact) {
  double e = 0.0;
  for (int i = 0; i < c.grid.n; ++i) e = std::max(e, std::abs(c.kappa(c.grid.point(i)) - exact));
  return e;
}

}  // namespace

TEST_CASE("curvature from samples: circle, line, helix") {
  const auto c = plane_curve_from_points(circle_points(256, 1.0, 0.0), true);
  CHECK(max_kappa_error(c, 1.0) < 1e-3);
  CHECK(c.length() == doctest::Approx(2 * pi).epsilon(1e-3));
  CHECK(c.periodic());

  std::vector<std::array<double, 2>> line;
  for (int k = 0; k < 20; ++k) line.push_back({0.5 * k, 0.25 * k});
  CHECK(max_kappa_error(plane_curve_from_points(line, false), 0.0) < 1e-12);

  const auto h = space_curve_from_points(helix_points(512, 1.0, 1.0, 2.0), false);
  for (int i = 0; i < h.grid.n; ++i) {
    const double u = h.grid.point(i);
    REQUIRE(std::abs(h.kappa(u) - 0.5) < 1e-2);
    REQUIRE(std::abs(h.tau(u) - 0.5) < 1e-2);
  }
}

TEST_CASE("curvature from samples converges at second order") {
  const double e1 = max_kappa_error(plane_curve_from_points(circle_points(64, 1.0, 0.3), true), 1.0);
  const double e2 = max_kappa_error(plane_curve_from_points(circle_points(128, 1.0, 0.3), true), 1.0);
  CHECK(e2 < e1);
  CHECK(e1 / e2 > 3.0);

  auto herr = [](int n) {
    const auto h = space_curve_from_points(helix_points(n, 1.0, 0.5, 1.0), false);
    double e = 0.0;
    for (int i = 0; i < h.grid.n; ++i) {
      const double u = h.grid.point(i);
      e = std::max({e, std::abs(h.kappa(u) - 0.8), std::abs(h.tau(u) - 0.4)});
    }
    return e;
  };
  CHECK(herr(64) / herr(128) > 3.0);
}

TEST_CASE("curvature from samples rejects degenerate input") {
  std::vector<std::array<double, 2>> few{{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  CHECK_THROWS_AS(plane_curve_from_points(few, false), std::invalid_argument);
  std::vector<std::array<double, 2>> rep{{0, 0}, {1, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}};
  CHECK_THROWS_AS(plane_curve_from_points(rep, false), std::invalid_argument);
}

TEST_CASE("point CSV ingestion") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto p2 = dir / "fiberdiff_pts2.csv";
  {
    std::ofstream o(p2);
    o << "x,y\n";
    for (const auto& q : circle_points(64, 2.0, 0.0)) o << q[0] << "," << q[1] << "\n";
  }
  const auto ps = read_points_csv(p2.string());
  CHECK(ps.dim == 2);
  CHECK(ps.points.size() == 64);
  const auto curve = curvature_from_samples(ps, true);
  REQUIRE(std::holds_alternative<PlaneCurve>(curve));
  CHECK(max_kappa_error(std::get<PlaneCurve>(curve), 0.5) < 1e-3);

  const auto p3 = dir / "fiberdiff_pts3.csv";
  {
    std::ofstream o(p3);
    o.precision(17);
    o << "x,y,z\n";
    for (const auto& q : helix_points(100, 1.0, 1.0, 1.0)) o << q[0] << "," << q[1] << "," << q[2] << "\n";
  }
  CHECK(std::holds_alternative<SpaceCurve>(curvature_from_samples(read_points_csv(p3.string()), false)));

  const auto bad = dir / "fiberdiff_bad.csv";
  {
    std::ofstream o(bad);
    o << "1,2\n3,4\n";
  }
  CHECK_THROWS_AS(read_points_csv(bad.string()), std::invalid_argument);
  CHECK_THROWS(read_points_csv((dir / "does_not_exist_fiberdiff.csv").string()));
  std::filesystem::remove(p2);
  std::filesystem::remove(p3);
  std::filesystem::remove(bad);
}
