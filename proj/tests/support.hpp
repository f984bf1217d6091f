#pragma once

// Shared helpers for the test suites: random expression generators and
// finite-difference oracles that do not go through the symbolic engine.

#include <cmath>
#include <random>
#include <vector>

#include "stochsym/domain.hpp"
#include "stochsym/expr.hpp"

namespace stochsym::testing {

/// Random smooth expression, finite on all of R^n: every division and
/// logarithm is guarded by a strictly positive denominator/argument.
inline Expression random_expression(std::mt19937_64& rng, std::size_t n, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 8);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_int_distribution<std::size_t> var(0, n - 1);
  const int kind = pick(rng);
  if (kind == 0) return Expression::constant(std::round(coef(rng) * 4.0) / 4.0);
  if (kind == 1) return Expression::variable(var(rng));
  const Expression a = random_expression(rng, n, depth - 1);
  const Expression b = random_expression(rng, n, depth - 1);
  switch (kind) {
    case 2:
      return a + b;
    case 3:
      return a - b;
    case 4:
      return a * b;
    case 5:
      return a / (1.0 + pow(b, Rational(2)));
    case 6:
      return sin(a) + cos(b);
    case 7:
      return log(1.0 + pow(a, Rational(2))) * exp(0.25 * sin(b));
    default:
      return sqrt(1.0 + pow(a, Rational(2))) + pow(1.0 + pow(b, Rational(2)), Rational(-3, 2));
  }
}

/// Central finite difference of e along x_index with step h.
inline double central_difference(const Expression& e, std::vector<double> p, std::size_t index, double h = 1e-5) {
  const double x = p[index];
  p[index] = x + h;
  const double up = evaluate(e, p);
  p[index] = x - h;
  const double down = evaluate(e, p);
  return (up - down) / (2.0 * h);
}

/// Seeded points of a box, independent of Domain::sample_points.
inline std::vector<std::vector<double>> random_points(std::mt19937_64& rng, std::size_t count,
                                                      std::vector<Interval> box) {
  std::vector<std::vector<double>> pts(count, std::vector<double>(box.size()));
  for (auto& p : pts) {
    for (std::size_t i = 0; i < box.size(); ++i) {
      p[i] = std::uniform_real_distribution<double>(box[i].low, box[i].high)(rng);
    }
  }
  return pts;
}

/// Classical RK4 flow of the vector field Y for parameter a in `steps` steps.
/// Evaluates Y through the reference evaluator, not a Tape.
inline std::vector<double> rk4_flow(const std::vector<Expression>& Y, std::vector<double> p, double a,
                                    int steps = 200) {
  const double h = a / steps;
  auto field = [&](const std::vector<double>& q) {
    std::vector<double> v(Y.size());
    for (std::size_t i = 0; i < Y.size(); ++i) v[i] = evaluate(Y[i], q);
    return v;
  };
  auto axpy = [](const std::vector<double>& x, double s, const std::vector<double>& d) {
    std::vector<double> r(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += s * d[i];
    return r;
  };
  for (int k = 0; k < steps; ++k) {
    const auto k1 = field(p);
    const auto k2 = field(axpy(p, h / 2, k1));
    const auto k3 = field(axpy(p, h / 2, k2));
    const auto k4 = field(axpy(p, h, k3));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return p;
}

}  // namespace stochsym::testing
