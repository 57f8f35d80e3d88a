#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "fiberdiff/exterior.hpp"

using namespace fiberdiff::exterior;

namespace {

DiagMetric random_metric(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> d(0.1, 5.0);
  std::array<double, 3> g{d(rng), d(rng), d(rng)};
  return DiagMetric(std::span<const double>(g.data(), static_cast<std::size_t>(dim)));
}

FrameForm random_form(std::mt19937_64& rng, int dim, int degree) {
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  FrameForm f(dim, degree);
  for (IndexMask m : f.basis()) f.set_by_mask(m, d(rng));
  return f;
}

}  // namespace

TEST_CASE("flat lowers indices with the diagonal metric") {
  CHECK(flat(FrameVector{1.0, 0.0}, DiagMetric{1.0, 1.0}).distance(FrameForm::one_form({1.0, 0.0})) == 0.0);
  CHECK(flat(FrameVector{1.0, 2.0}, DiagMetric{4.0, 1.0}).distance(FrameForm::one_form({4.0, 2.0})) == 0.0);
  CHECK_THROWS_AS(flat(FrameVector{1.0, 2.0, 3.0}, DiagMetric{4.0, 1.0}), std::invalid_argument);
}

TEST_CASE("sharp raises indices") {
  const auto v = sharp(FrameForm::one_form({4.0, 2.0}), DiagMetric{4.0, 1.0});
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(2.0));
  const auto z = sharp(FrameForm::one_form({0.0, 0.0, 0.0}), DiagMetric{3.0, 7.0, 0.5});
  for (int i = 0; i < 3; ++i) CHECK(z[i] == 0.0);
  CHECK_THROWS_AS(sharp(FrameForm::one_form({1.0, 1.0}), DiagMetric{1.0, 1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(sharp(FrameForm::scalar(2, 1.0), DiagMetric{1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("hodge star on 1-forms in 2D") {
  const auto e = hodge(FrameForm::monomial(2, {0}), DiagMetric{1.0, 1.0});
  CHECK(e.degree() == 1);
  CHECK(e.coeff({1}) == doctest::Approx(1.0));
  CHECK(e.coeff({0}) == 0.0);

  // g^00 = 1/4, sqrt(det g) = 2.
  const auto s = hodge(FrameForm::monomial(2, {0}), DiagMetric{4.0, 1.0});
  CHECK(s.coeff({1}) == doctest::Approx(0.5).epsilon(1e-15));

  // *X^1 = -X^0 on the Euclidean plane.
  CHECK(hodge(FrameForm::monomial(2, {1}), DiagMetric::identity(2)).coeff({0}) == doctest::Approx(-1.0));
}

TEST_CASE("hodge star on the slab metric matches the principal-frame evaluations") {
  const double k1 = -0.7, k2 = 0.4, v = 0.3;
  const DiagMetric g{(1 - k1 * v) * (1 - k1 * v), (1 - k2 * v) * (1 - k2 * v), 1.0};
  const auto s1 = hodge(FrameForm::monomial(3, {0}), g);
  CHECK(s1.coeff({1, 2}) == doctest::Approx((1 - k2 * v) / (1 - k1 * v)).epsilon(1e-14));
  CHECK(s1.coeff({0, 2}) == 0.0);
  const auto s2 = hodge(FrameForm::monomial(3, {1}), g);
  CHECK(s2.coeff({0, 2}) == doctest::Approx(-(1 - k1 * v) / (1 - k2 * v)).epsilon(1e-14));
  CHECK(s2.coeff({1, 2}) == 0.0);
}

TEST_CASE("hodge star of scalars and top forms") {
  const DiagMetric g{4.0, 9.0, 0.25};
  const auto mu = hodge(FrameForm::scalar(3, 1.0), g);
  CHECK(mu.coeff({0, 1, 2}) == doctest::Approx(3.0));
  CHECK(mu.distance(volume_form(g)) < 1e-15);
  CHECK(hodge(FrameForm::monomial(3, {0, 1, 2}), g).coeff({}) == doctest::Approx(1.0 / 3.0));
  // 1D frames are supported for curve bases.
  CHECK(hodge(FrameForm::scalar(1, 2.0), DiagMetric{1.0}).coeff({0}) == doctest::Approx(2.0));
}

TEST_CASE("form construction rejects bad index tuples") {
  FrameForm f(3, 2);
  CHECK_THROWS_AS(f.set({1, 0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(f.set({0, 3}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(f.set({0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(FrameForm(4, 1), std::invalid_argument);
  CHECK_THROWS_AS(FrameForm(2, 3), std::invalid_argument);
  CHECK_THROWS_AS((DiagMetric{1.0, -1.0}), std::invalid_argument);
  CHECK_THROWS_AS(wedge(FrameForm(2, 1), FrameForm(2, 2)), std::invalid_argument);
}

TEST_CASE("property: double star obeys the (-1)^(l(n-l)) law") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial)
    for (int n = 1; n <= 3; ++n) {
      const auto g = random_metric(rng, n);
      for (int l = 0; l <= n; ++l) {
        const auto w = random_form(rng, n, l);
        const double sign = ((l * (n - l)) % 2 == 0) ? 1.0 : -1.0;
        REQUIRE(hodge(hodge(w, g), g).distance(sign * w) < 1e-12);
      }
    }
}

TEST_CASE("property: sharp and flat are inverse") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int trial = 0; trial < 500; ++trial)
    for (int n = 1; n <= 3; ++n) {
      const auto g = random_metric(rng, n);
      std::array<double, 3> c{d(rng), d(rng), d(rng)};
      const FrameVector v(std::span<const double>(c.data(), static_cast<std::size_t>(n)));
      const auto back = sharp(flat(v, g), g);
      for (int i = 0; i < n; ++i) REQUIRE(std::abs(back[i] - v[i]) < 1e-12 * (1 + std::abs(v[i])));
      const auto a = random_form(rng, n, 1);
      REQUIRE(flat(sharp(a, g), g).distance(a) < 1e-12);
    }
}

TEST_CASE("property: omega ^ *eta = <omega, eta> mu") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial)
    for (int n = 2; n <= 3; ++n) {
      const auto g = random_metric(rng, n);
      for (int l = 0; l <= n; ++l) {
        const auto a = random_form(rng, n, l);
        const auto b = random_form(rng, n, l);
        const auto lhs = wedge(a, hodge(b, g));
        const auto rhs = inner(a, b, g) * volume_form(g);
        REQUIRE(lhs.distance(rhs) < 1e-11);
      }
    }
}
