#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stochsym/domain.hpp"
#include "stochsym/errors.hpp"
#include "stochsym/expr.hpp"
#include "support.hpp"

namespace stochsym {
namespace {

using testing::central_difference;
using testing::random_expression;
using testing::random_points;

Domain punctured_plane() { return Domain({{-2, 2}, {-2, 2}}, {parse("x^2+y^2", 2)}); }

TEST(Parse, DriftComponentHasExpectedShape) {
  const Expression e = parse("x1/(x1^2+x2^2)", 2);
  ASSERT_EQ(e.op(), Op::Div);
  const Node& num = *e.node().lhs;
  const Node& den = *e.node().rhs;
  EXPECT_EQ(num.op, Op::Var);
  EXPECT_EQ(num.index, 0u);
  ASSERT_EQ(den.op, Op::Add);
  ASSERT_EQ(den.lhs->op, Op::Pow);
  EXPECT_EQ(den.lhs->exponent, Rational(2));
  EXPECT_EQ(den.lhs->lhs->index, 0u);
  ASSERT_EQ(den.rhs->op, Op::Pow);
  EXPECT_EQ(den.rhs->lhs->index, 1u);
}

TEST(Parse, ZeroLiteral) { EXPECT_TRUE(parse("0", 2).is_constant(0.0)); }

TEST(Parse, SqrtOfSumOfSquares) {
  const Expression e = parse("sqrt(x1^2+x2^2)", 2);
  EXPECT_DOUBLE_EQ(evaluate(e, std::vector<double>{3, 4}), 5.0);
}

TEST(Parse, AliasesAndFunctions) {
  const Expression e = parse(" neg(x) + exp(0)*y - z^(1/2) ", 3);
  EXPECT_DOUBLE_EQ(evaluate(e, std::vector<double>{1, 2, 4}), -1.0 + 2.0 - 2.0);
  EXPECT_DOUBLE_EQ(evaluate(parse("(x^2+y^2)^(-3/2)", 2), std::vector<double>{3, 4}), 1.0 / 125.0);
  EXPECT_DOUBLE_EQ(evaluate(parse("-x^2", 2), std::vector<double>{3, 0}), -9.0);
  EXPECT_DOUBLE_EQ(evaluate(parse("2.5e-1*x", 1), std::vector<double>{4}), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(parse("x^0.5", 1), std::vector<double>{9}), 3.0);
}

TEST(Parse, SyntaxErrorCarriesPosition) {
  try {
    parse("x1 + * x2", 2);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 5u);
  }
  EXPECT_THROW(parse("(x1", 2), ParseError);
  EXPECT_THROW(parse("x1 x2", 2), ParseError);
  EXPECT_THROW(parse("", 2), ParseError);
  EXPECT_THROW(parse("x^y", 2), ParseError);
}

TEST(Parse, UnknownIdentifierAndIndexOutOfRange) {
  EXPECT_THROW(parse("w + 1", 2), ParseError);
  EXPECT_THROW(parse("tan(x)", 2), ParseError);
  EXPECT_THROW(parse("x3", 2), ParseError);
  EXPECT_THROW(parse("z", 2), ParseError);
  EXPECT_THROW(parse("x0", 2), ParseError);
  EXPECT_NO_THROW(parse("x4", 4));
  EXPECT_THROW(parse("x", 4), ParseError);  // aliases only for n <= 3
}

TEST(Evaluate, HandArithmetic) {
  EXPECT_DOUBLE_EQ(evaluate(parse("x1/(x1^2+x2^2)", 2), std::vector<double>{1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(evaluate(parse("x1", 2), std::vector<double>{7, -2}), 7.0);
}

TEST(Evaluate, UndefinedPoints) {
  EXPECT_THROW(evaluate(parse("1/x1", 2), std::vector<double>{0, 1}), UndefinedAtPoint);
  EXPECT_THROW(evaluate(parse("sqrt(x1)", 2), std::vector<double>{-1, 1}), UndefinedAtPoint);
  EXPECT_THROW(evaluate(parse("log(x1)", 2), std::vector<double>{0, 1}), UndefinedAtPoint);
  EXPECT_THROW(evaluate(parse("x1^(-1)", 2), std::vector<double>{0, 1}), UndefinedAtPoint);
  EXPECT_THROW(evaluate(parse("x1^(1/2)", 2), std::vector<double>{-4, 1}), UndefinedAtPoint);
  EXPECT_DOUBLE_EQ(evaluate(parse("x1^(1/3)", 2), std::vector<double>{-8, 1}), -2.0);
  EXPECT_THROW(evaluate(parse("x1+x2", 2), std::vector<double>{1}), DimensionError);
}

TEST(Evaluate, DeterministicForIdenticalInput) {
  const Expression e = parse("sin(x)*exp(y)/(1+x^2)", 2);
  const std::vector<double> p{0.3, -0.7};
  EXPECT_EQ(evaluate(e, p), evaluate(e, p));
}

TEST(Differentiate, QuotientAgainstFiniteDifferences) {
  const Expression e = parse("x/(x^2+y^2)", 2);
  const Expression dx = differentiate(e, 0);
  const Expression expected = parse("(y^2-x^2)/(x^2+y^2)^2", 2);
  EXPECT_TRUE(is_zero(dx - expected, punctured_plane()));

  std::mt19937_64 rng(7);
  for (const auto& p : random_points(rng, 10, {{0.5, 2}, {0.5, 2}})) {
    const double fd = central_difference(e, p, 0);
    EXPECT_NEAR(evaluate(dx, p), fd, 1e-6 * (1.0 + std::fabs(fd)));
  }
}

TEST(Differentiate, IndependentVariableGivesZero) { EXPECT_TRUE(differentiate(parse("x", 2), 1).is_constant(0.0)); }

TEST(Differentiate, SqrtAgainstFiniteDifferences) {
  const Expression e = parse("sqrt(x^2+y^2)", 2);
  const Expression dx = differentiate(e, 0);
  EXPECT_TRUE(is_zero(dx - parse("x/sqrt(x^2+y^2)", 2), punctured_plane()));
  std::mt19937_64 rng(11);
  for (const auto& p : random_points(rng, 10, {{-2, -0.5}, {0.5, 2}})) {
    const double fd = central_difference(e, p, 0);
    EXPECT_NEAR(evaluate(dx, p), fd, 1e-6 * (1.0 + std::fabs(fd)));
  }
}

TEST(Differentiate, RandomExpressionsAgainstFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const Expression e = random_expression(rng, 3, 4);
    for (std::size_t i = 0; i < 3; ++i) {
      const Expression d = differentiate(e, i);
      for (const auto& p : random_points(rng, 3, {{-1, 1}, {-1, 1}, {-1, 1}})) {
        const double fd = central_difference(e, p, i);
        EXPECT_NEAR(evaluate(d, p), fd, 1e-6 * (1.0 + std::fabs(fd))) << to_string(e, 3);
      }
    }
  }
}

TEST(IsZero, PythagoreanIdentity) {
  EXPECT_TRUE(is_zero(parse("sin(x1)^2+cos(x1)^2-1", 2), Domain::cube(2, 3.0)));
}

TEST(IsZero, CoordinateIsNotZero) {
  const Domain unit({{0, 1}, {0, 1}});
  EXPECT_FALSE(is_zero(parse("x1", 2), unit));
  EXPECT_FALSE(is_zero(parse("1e-6*x1", 2), unit));
}

TEST(IsZero, AllPointsUndefinedIsUndecidable) {
  EXPECT_THROW(is_zero(parse("sqrt(-1-x^2)", 2), Domain::cube(2, 1.0)), UndecidableError);
}

TEST(IsZero, SamplePointsAreDeterministicAndRespectExclusions) {
  const Domain d = punctured_plane();
  const auto a = d.sample_points();
  const auto b = d.sample_points();
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 2 * kZeroSamples);
  for (std::size_t k = 0; k < kZeroSamples; ++k) {
    const double r2 = a[2 * k] * a[2 * k] + a[2 * k + 1] * a[2 * k + 1];
    EXPECT_GE(r2, d.margin());
  }
  EXPECT_NEAR(d.margin(), 1e-3 * std::sqrt(32.0), 1e-15);
  EXPECT_THROW(Domain({{1, 1}}), DomainError);
}

// Properties over randomly generated expressions.

TEST(Properties, LinearityOfDifferentiation) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> c(-3, 3);
  const Domain d = Domain::cube(2, 1.5);
  for (int trial = 0; trial < 25; ++trial) {
    const Expression e1 = random_expression(rng, 2, 4);
    const Expression e2 = random_expression(rng, 2, 4);
    const double a = c(rng), b = c(rng);
    for (std::size_t i = 0; i < 2; ++i) {
      const Expression lhs = differentiate(a * e1 + b * e2, i);
      const Expression rhs = a * differentiate(e1, i) + b * differentiate(e2, i);
      EXPECT_TRUE(is_zero(lhs - rhs, d)) << to_string(e1, 2) << " ; " << to_string(e2, 2);
    }
  }
}

TEST(Properties, ClairautSymmetry) {
  std::mt19937_64 rng(2);
  const Domain d = Domain::cube(3, 1.5);
  for (int trial = 0; trial < 25; ++trial) {
    const Expression e = random_expression(rng, 3, 4);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = i + 1; j < 3; ++j) {
        const Expression diff = differentiate(differentiate(e, i), j) - differentiate(differentiate(e, j), i);
        EXPECT_TRUE(is_zero(diff, d)) << to_string(e, 3);
      }
    }
  }
}

TEST(Properties, ProductRule) {
  std::mt19937_64 rng(3);
  const Domain d = Domain::cube(2, 1.5);
  for (int trial = 0; trial < 25; ++trial) {
    const Expression e1 = random_expression(rng, 2, 4);
    const Expression e2 = random_expression(rng, 2, 4);
    const Expression lhs = differentiate(e1 * e2, 0);
    const Expression rhs = e1 * differentiate(e2, 0) + e2 * differentiate(e1, 0);
    EXPECT_TRUE(is_zero(lhs - rhs, d));
  }
}

TEST(Properties, PrintParseRoundTrip) {
  std::mt19937_64 rng(4);
  const Domain d = Domain::cube(3, 1.5);
  for (int trial = 0; trial < 60; ++trial) {
    const Expression e = random_expression(rng, 3, 5);
    for (std::size_t dim : {3u, 5u}) {
      const std::string text = to_string(e, dim);
      const Expression back = parse(text, dim);
      EXPECT_TRUE(is_zero(back - e, d)) << text;
    }
  }
  const Expression tricky = parse("-(x*y)*(-2) - x^(-3/2)*(-y)^2 / (-(z))", 3);
  const Expression back = parse(to_string(tricky, 3), 3);
  EXPECT_TRUE(is_zero(back - tricky, Domain({{0.5, 1.5}, {0.5, 1.5}, {0.5, 1.5}})));
}

TEST(Tape, SharedSubexpressionsEvaluatedConsistently) {
  const Expression r2 = parse("x^2+y^2", 2);
  const Expression f = r2 * r2 + sqrt(r2);
  const std::vector<Expression> outs{f, r2, differentiate(f, 0)};
  const Tape tape(outs);
  const std::vector<double> p{3, 4};
  const auto v = tape(p);
  EXPECT_DOUBLE_EQ(v[0], 625.0 + 5.0);
  EXPECT_DOUBLE_EQ(v[1], 25.0);
  EXPECT_DOUBLE_EQ(v[2], 2 * 25.0 * 6.0 + 3.0 / 5.0);
}

TEST(Tape, RepeatedDifferentiationStaysSmall) {
  // Memoized differentiation keeps shared structure; without it this tape
  // would grow exponentially.
  Expression e = parse("exp(sin(x)*y)/(1+x^2)", 2);
  for (int k = 0; k < 8; ++k) e = differentiate(e, k % 2);
  const std::vector<double> p{0.3, 0.4};
  EXPECT_TRUE(std::isfinite(evaluate(e, p)));
}

TEST(Substitute, ComposesAndChecksDimension) {
  const Expression e = parse("x*y", 2);
  const std::vector<Expression> repl{parse("x+1", 2), parse("2*y", 2)};
  EXPECT_DOUBLE_EQ(evaluate(substitute(e, repl), std::vector<double>{1, 3}), 12.0);
  const std::vector<Expression> short_repl{parse("x", 2)};
  EXPECT_THROW(substitute(e, short_repl), DimensionError);
}

}  // namespace
}  // namespace stochsym
