#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "fiberdiff/quadrature.hpp"

using namespace fiberdiff::quadrature;

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2n-1 exactly") {
  for (int n : {2, 3, 4, 7, 16, 32, 64}) {
    const auto& r = gauss_legendre(n);
    double wsum = 0.0;
    for (double w : r.weights) wsum += w;
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    for (int p = 0; p <= 2 * n - 1; ++p) {
      const double exact = (p % 2 == 1) ? 0.0 : 2.0 / (p + 1);
      const double got = integrate(r, [p](double x) { return std::pow(x, p); });
      CHECK(got == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
    }
  }
}

TEST_CASE("Gauss-Legendre on a mapped interval") {
  const auto r = gauss_legendre(32, -0.5, 0.5);
  CHECK(integrate(r, [](double v) { return 1.0 / (1.0 - v); }) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(gauss_legendre(1), std::invalid_argument);
}

TEST_CASE("periodic trapezoid is spectrally accurate on smooth periodic integrands") {
  const auto r = periodic_trapezoid(64);
  const double got = integrate(r, [](double t) { return 1.0 / (1.0 - 0.5 * std::cos(t)); });
  CHECK(got == doctest::Approx(2.0 * std::numbers::pi / std::sqrt(0.75)).epsilon(1e-15));
  // Exact for trigonometric polynomials of degree < n.
  CHECK(std::abs(integrate(periodic_trapezoid(8), [](double t) { return std::cos(7 * t); })) < 1e-14);
}
