#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fiberdiff/effdiff.hpp"
#include "fiberdiff/errors.hpp"
#include "fiberdiff/experiments.hpp"
#include "fiberdiff/solvers.hpp"

using namespace fiberdiff;
using namespace fiberdiff::solvers;
constexpr double two_pi = 2.0 * std::numbers::pi;

namespace {

effdiff::EffectiveField channel_field(const geometry::Grid1D& grid, geometry::Field1D kappa, double w,
                                      double D0 = 1.0) {
  return effdiff::effective_field({effdiff::PlanarChannel{geometry::PlaneCurve(grid, std::move(kappa)), w}, D0, {}});
}

double rel_change(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Decay rate of the first cosine mode on a flat periodic line of length 1.
double flat_rate(int n, double dt, double t_end, TimeScheme scheme) {
  const geometry::Grid1D g(1.0, n, true);
  const auto field = channel_field(g, geometry::Field1D::constant(0.0), 0.2);
  auto s = make_state_1d(g, [](double u) { return 1.0 + std::cos(two_pi * u); });
  const FickJacobs1D fj(field, dt, {scheme});
  const double a0 = experiments::cosine_amplitude(s, 1);
  const auto steps = std::lround(t_end / dt);
  for (long k = 0; k < steps; ++k) fj.step(s);
  return -std::log(experiments::cosine_amplitude(s, 1) / a0) / s.t;
}

}  // namespace

TEST_CASE("reduced 1D: cosine mode decays at the heat-kernel rate") {
  const double rate = flat_rate(256, 1e-4, 0.05, TimeScheme::crank_nicolson);
  CHECK(rel_change(rate, two_pi * two_pi) <= 1e-4);
}

TEST_CASE("reduced 1D: stationary states") {
  const geometry::Grid1D g(3.0, 64, true);
  SUBCASE("constant rho with constant sigma") {
    const auto field = channel_field(g, geometry::Field1D::constant(0.7), 0.4);
    auto s = make_state_1d(g, [](double) { return 2.5; });
    const auto before = s.rho;
    s = step_fj_1d(s, field, 0.1);
    for (std::size_t i = 0; i < s.rho.size(); ++i) CHECK(s.rho[i] == doctest::Approx(before[i]).epsilon(1e-14));
  }
  SUBCASE("rho = c sigma with varying sigma") {
    // sigma varies through a curvature-dependent D; use a rescaled sigma field.
    auto field = channel_field(g, geometry::Field1D::function([](double u) { return std::sin(u); }), 0.5);
    for (std::size_t i = 0; i < field.size(); ++i) field.sigma[i] *= 1.0 + 0.4 * std::cos(two_pi * g.point(int(i)) / 3.0);
    GridState1D s{g, {}, 0.0};
    for (double sg : field.sigma) s.rho.push_back(3.0 * sg);
    const auto before = s.rho;
    const FickJacobs1D fj(field, 0.05);
    for (int k = 0; k < 50; ++k) fj.step(s);
    for (std::size_t i = 0; i < s.rho.size(); ++i) REQUIRE(std::abs(s.rho[i] - before[i]) <= 1e-13 * before[i]);
    CHECK(fj.flux_norm(s) < 1e-13);
  }
}

TEST_CASE("reduced 1D: mass conservation and maximum principle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (bool periodic : {true, false}) {
    const geometry::Grid1D g(2.0, 100, periodic);
    auto field = channel_field(g, geometry::Field1D::function([](double u) { return 1.5 * std::cos(3 * u); }), 0.4);
    GridState1D s{g, {}, 0.0};
    for (int i = 0; i < g.n; ++i) s.rho.push_back(U(rng));
    for (auto opts : {StepOptions{TimeScheme::backward_euler}, StepOptions{TimeScheme::crank_nicolson},
                      StepOptions{TimeScheme::crank_nicolson, FaceAverage::arithmetic}}) {
      const FickJacobs1D fj(field, 1e-3, opts);
      auto st = s;
      for (int k = 0; k < 200; ++k) {
        const double m0 = fj.mass(st);
        fj.step(st);
        REQUIRE(rel_change(fj.mass(st), m0) <= 1e-12);
      }
    }
  }
  // Constant coefficients, backward Euler: no new extrema.
  const geometry::Grid1D g(1.0, 64, true);
  const auto field = channel_field(g, geometry::Field1D::constant(0.0), 1.0);
  GridState1D s{g, {}, 0.0};
  for (int i = 0; i < g.n; ++i) s.rho.push_back(U(rng));
  const FickJacobs1D fj(field, 1e-3, {TimeScheme::backward_euler});
  for (int k = 0; k < 100; ++k) {
    const auto [lo, hi] = std::minmax_element(s.rho.begin(), s.rho.end());
    const double mn = *lo, mx = *hi;
    fj.step(s);
    for (double r : s.rho) {
      REQUIRE(r <= mx + 1e-13);
      REQUIRE(r >= mn - 1e-13);
    }
  }
}

TEST_CASE("reduced 1D: second-order spatial convergence") {
  const double exact = two_pi * two_pi;
  double prev = 0.0;
  for (int n : {16, 32, 64}) {
    const double err = std::abs(flat_rate(n, 1e-4, 0.02, TimeScheme::crank_nicolson) - exact);
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.05));
    prev = err;
  }
}

TEST_CASE("explicit stepping enforces the stability limit") {
  const geometry::Grid1D g(1.0, 64, true);
  const auto field = channel_field(g, geometry::Field1D::constant(0.0), 1.0);
  CHECK_THROWS_AS(FickJacobs1D(field, 1e-3, {TimeScheme::explicit_euler}), SolverError);
  const FickJacobs1D ok(field, 1e-4, {TimeScheme::explicit_euler});
  auto s = make_state_1d(g, [](double u) { return 1.0 + std::cos(two_pi * u); });
  const double m0 = ok.mass(s);
  for (int k = 0; k < 100; ++k) ok.step(s);
  CHECK(rel_change(ok.mass(s), m0) <= 1e-13);
  CHECK_THROWS_AS(FickJacobs1D(field, 0.0), SolverError);
  CHECK_THROWS_AS(FickJacobs1D(field, -1.0), SolverError);
}

TEST_CASE("reduced 2D: lined surface separates") {
  const double R = 1.0, Z = 1.0;
  const auto curve = geometry::make_circle(R, 128);
  const auto surf = geometry::make_lined_surface(curve, Z, 64);
  const auto field = effdiff::effective_field({effdiff::SurfaceSlab{surf, 0.5}, 1.0, {}});
  const double L = curve.grid.length;
  auto mode = [&](double s, double z) { return std::cos(two_pi * s / L) * std::cos(std::numbers::pi * z / Z); };
  auto st = make_state_2d(surf.axis1, surf.axis2, [&](double s, double z) { return 1.0 + mode(s, z); });
  auto project = [&](const GridState2D& x) {
    double a = 0.0;
    for (int i = 0; i < surf.axis1.n; ++i)
      for (int j = 0; j < surf.axis2.n; ++j)
        a += x.rho[std::size_t(i * surf.axis2.n + j)] * mode(surf.axis1.point(i), surf.axis2.point(j));
    return a;
  };
  const double ks = two_pi / L, kz = std::numbers::pi / Z;
  const double predicted = field.D1[0] * ks * ks + 1.0 * kz * kz;
  CHECK(field.D2[0] == 1.0);
  for (auto split : {Splitting::coupled, Splitting::alternating}) {
    auto s = st;
    const EffectiveDiffusion2D solver(field, 1e-3, {TimeScheme::crank_nicolson, FaceAverage::harmonic, split});
    const double a0 = project(s);
    for (int k = 0; k < 100; ++k) solver.step(s);
    const double rate = -std::log(project(s) / a0) / s.t;
    CHECK(rel_change(rate, predicted) <= 1e-3);
  }
}

TEST_CASE("reduced 2D: mass conservation on the torus") {
  const auto surf = geometry::make_torus(1.0, 2.0, 32, 32);
  const auto field = effdiff::effective_field({effdiff::SurfaceSlab{surf, 0.25}, 1.0, {}});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto st = make_state_2d(surf.axis1, surf.axis2, [&](double, double) { return U(rng); });
  for (auto split : {Splitting::coupled, Splitting::alternating}) {
    const EffectiveDiffusion2D solver(field, 1e-2, {TimeScheme::crank_nicolson, FaceAverage::harmonic, split});
    auto s = st;
    for (int k = 0; k < 100; ++k) {
      const double m0 = solver.mass(s);
      solver.step(s);
      REQUIRE(rel_change(solver.mass(s), m0) <= 1e-12);
    }
  }
}

TEST_CASE("reduced 2D: torus relaxes to rho proportional to sigma") {
  const auto surf = geometry::make_torus(1.0, 2.0, 32, 32);
  const auto field = effdiff::effective_field({effdiff::SurfaceSlab{surf, 0.25}, 1.0, {}});
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.5, 1.5);
  auto s = make_state_2d(surf.axis1, surf.axis2, [&](double, double) { return U(rng); });
  const EffectiveDiffusion2D solver(field, 0.5, {TimeScheme::backward_euler});
  const double f0 = solver.flux_norm(s);
  for (int k = 0; k < 400; ++k) solver.step(s);
  CHECK(solver.flux_norm(s) < 1e-8 * f0);
  const double c = s.rho[0] / field.sigma[0];
  for (std::size_t k = 0; k < s.rho.size(); ++k) REQUIRE(std::abs(s.rho[k] / field.sigma[k] - c) <= 1e-8 * c);
}

TEST_CASE("reduced 2D: misaligned frame is rejected") {
  auto surf = geometry::make_torus(1.0, 2.0, 16, 16);
  surf.principal_aligned = false;
  effdiff::EffectiveField field = effdiff::effective_field({effdiff::SurfaceSlab{surf, 0.25}, 1.0, {}});
  field.principal_aligned = false;
  CHECK_THROWS_AS(EffectiveDiffusion2D(field, 1e-2), SolverError);
}

TEST_CASE("channel oracle") {
  SUBCASE("flat channel: cosine decay") {
    const geometry::Grid1D g(1.0, 256, true);
    auto s = make_channel_state(g, 4, 0.1, geometry::Field1D::constant(0.0),
                                [](double u, double) { return 1.0 + std::cos(two_pi * u); });
    const ChannelOracle oracle(s, 1.0, 1e-4);
    const double a0 = experiments::cosine_amplitude(project_channel(s), 1);
    for (int k = 0; k < 500; ++k) oracle.step(s);
    const double rate = -std::log(experiments::cosine_amplitude(project_channel(s), 1) / a0) / s.t;
    CHECK(rel_change(rate, two_pi * two_pi) <= 1e-4);
  }
  SUBCASE("constant P is stationary") {
    const geometry::Grid1D g(2.0, 32, true);
    auto s = make_channel_state(g, 8, 0.3, geometry::Field1D::function([](double u) { return 2.0 * std::sin(u); }),
                                [](double, double) { return 4.0; });
    for (int k = 0; k < 20; ++k) s = step_channel_2d(s, 1.0, 0.01);
    for (double p : s.P) REQUIRE(p == doctest::Approx(4.0).epsilon(1e-13));
  }
  SUBCASE("mass conservation with varying curvature") {
    const geometry::Grid1D g(2.0, 48, true);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto s = make_channel_state(g, 8, 0.3, geometry::Field1D::function([](double u) { return 2.0 * std::sin(u); }),
                                [&](double, double) { return U(rng); });
    const ChannelOracle oracle(s, 1.0, 1e-3);
    for (int k = 0; k < 200; ++k) {
      const double m0 = oracle.mass(s);
      oracle.step(s);
      REQUIRE(rel_change(oracle.mass(s), m0) <= 1e-12);
    }
  }
  SUBCASE("self-intersecting channel is rejected") {
    const geometry::Grid1D g(1.0, 16, true);
    CHECK_THROWS_AS(make_channel_state(g, 4, 1.0, geometry::Field1D::constant(2.5),
                                       [](double, double) { return 1.0; }),
                    InvariantViolation);
  }
}

TEST_CASE("projection onto the base") {
  const geometry::Grid1D g(2.0, 40, true);
  const auto kappa = geometry::Field1D::function([](double u) { return 1.5 * std::cos(u); });
  SUBCASE("P = 1 gives sigma = w") {
    const auto s = make_channel_state(g, 6, 0.5, kappa, [](double, double) { return 1.0; });
    for (double r : project_channel(s).rho) CHECK(r == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("fiber-constant P gives f sigma") {
    const auto s = make_channel_state(g, 6, 0.5, kappa, [](double u, double) { return 1.0 + u * u; });
    const auto r = project_channel(s);
    for (int i = 0; i < g.n; ++i) CHECK(r.rho[std::size_t(i)] == doctest::Approx(0.5 * (1.0 + g.point(i) * g.point(i))).epsilon(1e-14));
  }
  SUBCASE("random P: projected mass equals oracle mass") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const auto s = make_channel_state(g, 6, 0.5, kappa, [&](double, double) { return U(rng); });
    const ChannelOracle oracle(s, 1.0, 1e-3);
    const auto r = project_channel(s);
    double m = 0.0;
    for (double x : r.rho) m += x * g.spacing();
    CHECK(rel_change(m, oracle.mass(s)) <= 1e-13);
  }
}

TEST_CASE("oracle and reduction commute up to O(w^2)") {
  const auto wide = experiments::commutation_experiment(1.0, 0.1, 1.0, 0.5, 64, 8, 1e-3);
  const auto thin = experiments::commutation_experiment(1.0, 0.05, 1.0, 0.5, 64, 8, 1e-3);
  MESSAGE("w=0.1: " << wide.max_rel_diff << ", w=0.05: " << thin.max_rel_diff);
  CHECK(wide.max_rel_diff < 1e-3);
  CHECK(thin.max_rel_diff < wide.max_rel_diff / 3.0);
}
