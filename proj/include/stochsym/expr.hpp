#pragma once

// Minimal computer-algebra core: immutable expression DAGs over state
// variables x1..xn, symbolic differentiation, substitution, printing and a
// compiled evaluation tape.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stochsym {

/// Reduced fraction num/den with den > 0. Used only for pow exponents.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1);

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_integer() const noexcept { return den == 1; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

Rational operator-(const Rational& a, const Rational& b);
Rational operator*(const Rational& a, const Rational& b);

enum class Op : std::uint8_t {
  Const,
  Var,
  Neg,
  Sqrt,
  Exp,
  Log,
  Sin,
  Cos,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// Expression node. Nodes are never mutated after construction, so sharing
/// subtrees between expressions (and threads) is safe.
struct Node {
  Op op = Op::Const;
  double value = 0.0;     // Const
  std::size_t index = 0;  // Var
  Rational exponent;      // Pow
  NodePtr lhs;            // unary operand, or left operand
  NodePtr rhs;            // right operand of binary ops
};

/// Scalar-valued expression handle. Value semantics over a shared immutable DAG.
class Expression {
 public:
  /// The constant zero.
  Expression();
  explicit Expression(NodePtr node);

  static Expression constant(double value);
  static Expression variable(std::size_t index);

  const Node& node() const noexcept { return *node_; }
  const NodePtr& ptr() const noexcept { return node_; }
  Op op() const noexcept { return node_->op; }

  bool is_constant() const noexcept { return node_->op == Op::Const; }
  bool is_constant(double v) const noexcept { return is_constant() && node_->value == v; }

  /// One past the largest variable index used, 0 for a constant expression.
  std::size_t arity() const;

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a);

 private:
  NodePtr node_;
};

Expression operator+(const Expression& a, double b);
Expression operator+(double a, const Expression& b);
Expression operator-(const Expression& a, double b);
Expression operator-(double a, const Expression& b);
Expression operator*(double a, const Expression& b);
Expression operator*(const Expression& a, double b);
Expression operator/(const Expression& a, double b);
Expression operator/(double a, const Expression& b);

Expression sqrt(const Expression& e);
Expression exp(const Expression& e);
Expression log(const Expression& e);
Expression sin(const Expression& e);
Expression cos(const Expression& e);
Expression pow(const Expression& base, Rational exponent);

/// Parses the ASCII grammar
///   expr := term (('+'|'-') term)*
///   term := factor (('*'|'/') factor)*
///   factor := ('-'|'+') factor | base ('^' rational)?
///   base := number | ident | func '(' expr ')' | '(' expr ')'
/// with func in {sqrt, exp, log, sin, cos, neg} and ident in {x1..xn}; for
/// n <= 3 the aliases x, y, z are accepted. Throws ParseError.
Expression parse(std::string_view text, std::size_t dimension);

/// Prints in the grammar accepted by parse. dimension <= 3 prints aliases.
std::string to_string(const Expression& e, std::size_t dimension = 0);

/// Symbolic partial derivative with respect to x_{index}. Light rewrites
/// (0*e, e+0, 1*e, constant folding) keep results bounded.
Expression differentiate(const Expression& e, std::size_t index);

/// Replaces x_i by replacement[i]. Throws DimensionError if e uses an index
/// outside replacement.
Expression substitute(const Expression& e, std::span<const Expression> replacement);

/// Evaluates at a point. Throws UndefinedAtPoint on division by zero,
/// sqrt/log of a negative number, or a non-finite result.
double evaluate(const Expression& e, std::span<const double> point);

/// A set of expressions flattened to a straight-line program. Shared
/// subexpressions are evaluated once per call.
class Tape {
 public:
  Tape() = default;
  explicit Tape(std::span<const Expression> outputs);
  explicit Tape(const Expression& output);

  std::size_t output_count() const noexcept { return outputs_.size(); }
  std::size_t arity() const noexcept { return arity_; }

  /// Writes one value per output. Returns false if any needed operation is
  /// undefined at the point; out is then unspecified.
  bool evaluate(std::span<const double> point, std::span<double> out) const;

  /// Like evaluate, additionally reports the largest absolute value of any
  /// intermediate subterm (used as the scale of vanishing tests).
  bool evaluate(std::span<const double> point, std::span<double> out, double& max_abs_subterm) const;

  /// Throwing convenience wrapper.
  std::vector<double> operator()(std::span<const double> point) const;

 private:
  struct Instr {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    double value = 0.0;
    std::int64_t pnum = 0;
    std::int64_t pden = 1;
  };

  bool run(std::span<const double> point, std::vector<double>& slots, double* scale) const;

  std::vector<Instr> code_;
  std::vector<std::uint32_t> outputs_;
  std::size_t arity_ = 0;
};

}  // namespace stochsym
