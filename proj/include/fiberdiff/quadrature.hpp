#pragma once

#include <functional>
#include <span>
#include <vector>

namespace fiberdiff::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule of the given order on [-1, 1]. Nodes are the roots
/// of P_n found by Newton iteration; rules are cached per order.
const Rule& gauss_legendre(int order);

/// Rule mapped to [a, b].
Rule gauss_legendre(int order, double a, double b);

/// Equispaced nodes theta_k = 2 pi k / n with weights 2 pi / n.
Rule periodic_trapezoid(int points);

template <class F>
double integrate(const Rule& rule, F&& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k)
    s += rule.weights[k] * f(rule.nodes[k]);
  return s;
}

}  // namespace fiberdiff::quadrature
