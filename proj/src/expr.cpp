#include "stochsym/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "stochsym/errors.hpp"

namespace stochsym {

// ---------------------------------------------------------------------------
// Rational

Rational::Rational(std::int64_t n, std::int64_t d) {
  if (d == 0) throw Error("rational with zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
  num = g == 0 ? 0 : n / g;
  den = g == 0 ? 1 : d / g;
}

Rational operator-(const Rational& a, const Rational& b) {
  return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
}

Rational operator*(const Rational& a, const Rational& b) { return Rational(a.num * b.num, a.den * b.den); }

// ---------------------------------------------------------------------------
// Node construction with light local rewrites

namespace {

NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v == 0.0 ? 0.0 : v;  // no negative zero
  return n;
}

NodePtr make_node(Op op, NodePtr lhs, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

const NodePtr& zero_node() {
  static const NodePtr z = make_const(0.0);
  return z;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

double pow_value(double base, std::int64_t pnum, std::int64_t pden) {
  if (pden == 1) {
    if (base == 0.0 && pnum < 0) return std::numeric_limits<double>::quiet_NaN();
    return std::pow(base, static_cast<double>(pnum));
  }
  const double e = static_cast<double>(pnum) / static_cast<double>(pden);
  if (base >= 0.0) {
    if (base == 0.0 && pnum < 0) return std::numeric_limits<double>::quiet_NaN();
    return std::pow(base, e);
  }
  // Negative base: real root only for odd denominators.
  if (pden % 2 == 0) return std::numeric_limits<double>::quiet_NaN();
  const double mag = std::pow(-base, e);
  return (pnum % 2 == 0) ? mag : -mag;
}

double apply_unary(Op op, double a) {
  switch (op) {
    case Op::Neg:
      return -a;
    case Op::Sqrt:
      return a < 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(a);
    case Op::Exp:
      return std::exp(a);
    case Op::Log:
      return a <= 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::log(a);
    case Op::Sin:
      return std::sin(a);
    case Op::Cos:
      return std::cos(a);
    default:
      return std::numeric_limits<double>::quiet_NaN();
  }
}

double apply_binary(Op op, double a, double b) {
  switch (op) {
    case Op::Add:
      return a + b;
    case Op::Sub:
      return a - b;
    case Op::Mul:
      return a * b;
    case Op::Div:
      return b == 0.0 ? std::numeric_limits<double>::quiet_NaN() : a / b;
    default:
      return std::numeric_limits<double>::quiet_NaN();
  }
}

NodePtr unary(Op op, NodePtr a) {
  if (a->op == Op::Const) {
    const double v = apply_unary(op, a->value);
    if (std::isfinite(v)) return make_const(v);
  }
  if (op == Op::Neg && a->op == Op::Neg) return a->lhs;
  return make_node(op, std::move(a));
}

NodePtr binary(Op op, NodePtr a, NodePtr b) {
  if (a->op == Op::Const && b->op == Op::Const) {
    const double v = apply_binary(op, a->value, b->value);
    if (std::isfinite(v)) return make_const(v);
  }
  switch (op) {
    case Op::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      if (b->op == Op::Neg) return binary(Op::Sub, std::move(a), b->lhs);
      break;
    case Op::Sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return unary(Op::Neg, std::move(b));
      if (a == b) return zero_node();
      if (b->op == Op::Neg) return binary(Op::Add, std::move(a), b->lhs);
      break;
    case Op::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return zero_node();
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      if (is_const(a, -1.0)) return unary(Op::Neg, std::move(b));
      if (is_const(b, -1.0)) return unary(Op::Neg, std::move(a));
      break;
    case Op::Div:
      if (is_const(a, 0.0)) return zero_node();
      if (is_const(b, 1.0)) return a;
      if (is_const(b, -1.0)) return unary(Op::Neg, std::move(a));
      break;
    default:
      break;
  }
  return make_node(op, std::move(a), std::move(b));
}

NodePtr power(NodePtr base, Rational e) {
  if (e.num == 0) return make_const(1.0);
  if (e == Rational(1)) return base;
  if (base->op == Op::Const) {
    const double v = pow_value(base->value, e.num, e.den);
    if (std::isfinite(v)) return make_const(v);
  }
  auto n = std::make_shared<Node>();
  n->op = Op::Pow;
  n->exponent = e;
  n->lhs = std::move(base);
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------
// Expression

Expression::Expression() : node_(zero_node()) {}

Expression::Expression(NodePtr node) : node_(std::move(node)) {
  if (!node_) node_ = zero_node();
}

Expression Expression::constant(double value) { return Expression(make_const(value)); }

Expression Expression::variable(std::size_t index) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->index = index;
  return Expression(std::move(n));
}

std::size_t Expression::arity() const {
  std::size_t result = 0;
  std::vector<const Node*> stack{node_.get()};
  std::unordered_map<const Node*, bool> seen;
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.emplace(n, true).second) continue;
    if (n->op == Op::Var) result = std::max(result, n->index + 1);
    if (n->lhs) stack.push_back(n->lhs.get());
    if (n->rhs) stack.push_back(n->rhs.get());
  }
  return result;
}

Expression operator+(const Expression& a, const Expression& b) { return Expression(binary(Op::Add, a.ptr(), b.ptr())); }
Expression operator-(const Expression& a, const Expression& b) { return Expression(binary(Op::Sub, a.ptr(), b.ptr())); }
Expression operator*(const Expression& a, const Expression& b) { return Expression(binary(Op::Mul, a.ptr(), b.ptr())); }
Expression operator/(const Expression& a, const Expression& b) { return Expression(binary(Op::Div, a.ptr(), b.ptr())); }
Expression operator-(const Expression& a) { return Expression(unary(Op::Neg, a.ptr())); }

Expression operator+(const Expression& a, double b) { return a + Expression::constant(b); }
Expression operator+(double a, const Expression& b) { return Expression::constant(a) + b; }
Expression operator-(const Expression& a, double b) { return a - Expression::constant(b); }
Expression operator-(double a, const Expression& b) { return Expression::constant(a) - b; }
Expression operator*(double a, const Expression& b) { return Expression::constant(a) * b; }
Expression operator*(const Expression& a, double b) { return a * Expression::constant(b); }
Expression operator/(const Expression& a, double b) { return a / Expression::constant(b); }
Expression operator/(double a, const Expression& b) { return Expression::constant(a) / b; }

Expression sqrt(const Expression& e) { return Expression(unary(Op::Sqrt, e.ptr())); }
Expression exp(const Expression& e) { return Expression(unary(Op::Exp, e.ptr())); }
Expression log(const Expression& e) { return Expression(unary(Op::Log, e.ptr())); }
Expression sin(const Expression& e) { return Expression(unary(Op::Sin, e.ptr())); }
Expression cos(const Expression& e) { return Expression(unary(Op::Cos, e.ptr())); }
Expression pow(const Expression& base, Rational exponent) { return Expression(power(base.ptr(), exponent)); }

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, std::size_t dimension) : text_(text), dim_(dimension) {}

  Expression run() {
    Expression e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("syntax error: " + what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expression expr() {
    Expression e = term();
    for (;;) {
      if (accept('+'))
        e = e + term();
      else if (accept('-'))
        e = e - term();
      else
        return e;
    }
  }

  Expression term() {
    Expression e = factor();
    for (;;) {
      if (accept('*'))
        e = e * factor();
      else if (accept('/'))
        e = e / factor();
      else
        return e;
    }
  }

  Expression factor() {
    if (accept('-')) return -factor();
    if (accept('+')) return factor();
    Expression b = base();
    if (accept('^')) return pow(b, rational());
    return b;
  }

  // rational := ['-'] integer | ['-'] decimal | '(' ['-'] integer ['/' ['-'] integer] ')'
  Rational rational() {
    skip_ws();
    if (accept('(')) {
      const Rational r = signed_number_as_rational();
      if (accept('/')) {
        const Rational d = signed_number_as_rational();
        if (d.num == 0) fail("zero denominator in exponent");
        expect(')');
        return Rational(r.num * d.den, r.den * d.num);
      }
      expect(')');
      return r;
    }
    return signed_number_as_rational();
  }

  Rational signed_number_as_rational() {
    bool negative = false;
    while (accept('-')) negative = !negative;
    skip_ws();
    const std::size_t start = pos_;
    std::int64_t num = 0;
    std::int64_t den = 1;
    bool digits = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      num = num * 10 + (text_[pos_++] - '0');
      digits = true;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        num = num * 10 + (text_[pos_++] - '0');
        den *= 10;
        digits = true;
      }
    }
    if (!digits) {
      pos_ = start;
      fail("expected rational exponent");
    }
    return Rational(negative ? -num : num, den);
  }

  Expression base() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail(std::string("unexpected '") + c + "'");
  }

  Expression number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return Expression::constant(v);
  }

  Expression identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view id = text_.substr(start, pos_ - start);

    static constexpr std::string_view functions[] = {"sqrt", "exp", "log", "sin", "cos", "neg"};
    for (std::string_view f : functions) {
      if (id == f) {
        expect('(');
        Expression arg = expr();
        expect(')');
        if (f == "sqrt") return sqrt(arg);
        if (f == "exp") return exp(arg);
        if (f == "log") return log(arg);
        if (f == "sin") return sin(arg);
        if (f == "cos") return cos(arg);
        return -arg;
      }
    }

    std::size_t index = 0;
    if (dim_ <= 3 && id.size() == 1 && (id[0] == 'x' || id[0] == 'y' || id[0] == 'z')) {
      index = static_cast<std::size_t>(id[0] - 'x');
    } else if (id.size() >= 2 && id[0] == 'x' &&
               std::all_of(id.begin() + 1, id.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      std::size_t one_based = 0;
      std::from_chars(id.data() + 1, id.data() + id.size(), one_based);
      if (one_based == 0) throw ParseError("unknown identifier '" + std::string(id) + "'", start);
      index = one_based - 1;
    } else {
      throw ParseError("unknown identifier '" + std::string(id) + "'", start);
    }
    if (index >= dim_) {
      throw ParseError("variable '" + std::string(id) + "' exceeds dimension " + std::to_string(dim_), start);
    }
    return Expression::variable(index);
  }

  std::string_view text_;
  std::size_t dim_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse(std::string_view text, std::size_t dimension) { return Parser(text, dimension).run(); }

// ---------------------------------------------------------------------------
// Printer

namespace {

int precedence(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub:
      return 1;
    case Op::Mul:
    case Op::Div:
      return 2;
    case Op::Neg:
      return 3;
    case Op::Pow:
      return 4;
    case Op::Const:
      return n.value < 0.0 ? 3 : 5;
    default:
      return 5;
  }
}

std::string format_number(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_exponent(const Rational& r) {
  if (r.is_integer() && r.num >= 0) return std::to_string(r.num);
  if (r.is_integer()) return "(" + std::to_string(r.num) + ")";
  return "(" + std::to_string(r.num) + "/" + std::to_string(r.den) + ")";
}

void print(const Node& n, std::size_t dim, std::string& out);

void print_child(const Node& child, int min_prec, std::size_t dim, std::string& out) {
  if (precedence(child) < min_prec) {
    out += '(';
    print(child, dim, out);
    out += ')';
  } else {
    print(child, dim, out);
  }
}

void print(const Node& n, std::size_t dim, std::string& out) {
  switch (n.op) {
    case Op::Const:
      out += format_number(n.value);
      return;
    case Op::Var:
      if (dim != 0 && dim <= 3) {
        out += static_cast<char>('x' + n.index);
      } else {
        out += 'x';
        out += std::to_string(n.index + 1);
      }
      return;
    case Op::Neg:
      out += '-';
      print_child(*n.lhs, 4, dim, out);
      return;
    case Op::Sqrt:
    case Op::Exp:
    case Op::Log:
    case Op::Sin:
    case Op::Cos: {
      static constexpr const char* names[] = {"sqrt", "exp", "log", "sin", "cos"};
      out += names[static_cast<int>(n.op) - static_cast<int>(Op::Sqrt)];
      out += '(';
      print(*n.lhs, dim, out);
      out += ')';
      return;
    }
    case Op::Add:
      print_child(*n.lhs, 1, dim, out);
      out += '+';
      print_child(*n.rhs, 2, dim, out);
      return;
    case Op::Sub:
      print_child(*n.lhs, 1, dim, out);
      out += '-';
      print_child(*n.rhs, 2, dim, out);
      return;
    case Op::Mul:
      print_child(*n.lhs, 2, dim, out);
      out += '*';
      print_child(*n.rhs, 4, dim, out);
      return;
    case Op::Div:
      print_child(*n.lhs, 2, dim, out);
      out += '/';
      print_child(*n.rhs, 4, dim, out);
      return;
    case Op::Pow:
      print_child(*n.lhs, 5, dim, out);
      out += '^';
      out += format_exponent(n.exponent);
      return;
  }
}

}  // namespace

std::string to_string(const Expression& e, std::size_t dimension) {
  std::string out;
  print(e.node(), dimension, out);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiation and substitution (memoized over the DAG)

namespace {

class Differentiator {
 public:
  explicit Differentiator(std::size_t index) : index_(index) {}

  Expression d(const NodePtr& p) {
    if (auto it = memo_.find(p.get()); it != memo_.end()) return it->second;
    Expression r = compute(p);
    memo_.emplace(p.get(), r);
    return r;
  }

 private:
  Expression compute(const NodePtr& p) {
    const Node& n = *p;
    const Expression self(p);
    switch (n.op) {
      case Op::Const:
        return Expression();
      case Op::Var:
        return Expression::constant(n.index == index_ ? 1.0 : 0.0);
      case Op::Neg:
        return -d(n.lhs);
      case Op::Sqrt:
        return d(n.lhs) / (Expression::constant(2.0) * self);
      case Op::Exp:
        return self * d(n.lhs);
      case Op::Log:
        return d(n.lhs) / Expression(n.lhs);
      case Op::Sin:
        return cos(Expression(n.lhs)) * d(n.lhs);
      case Op::Cos:
        return -(sin(Expression(n.lhs)) * d(n.lhs));
      case Op::Add:
        return d(n.lhs) + d(n.rhs);
      case Op::Sub:
        return d(n.lhs) - d(n.rhs);
      case Op::Mul: {
        const Expression a(n.lhs), b(n.rhs);
        return d(n.lhs) * b + a * d(n.rhs);
      }
      case Op::Div: {
        const Expression a(n.lhs), b(n.rhs);
        const Expression da = d(n.lhs), db = d(n.rhs);
        if (db.is_constant(0.0)) return da / b;
        return da / b - (a * db) / pow(b, Rational(2));
      }
      case Op::Pow: {
        const Expression base(n.lhs);
        const Rational e = n.exponent;
        const Expression coeff = Expression::constant(e.value());
        return coeff * pow(base, e - Rational(1)) * d(n.lhs);
      }
    }
    return Expression();
  }

  std::size_t index_;
  std::unordered_map<const Node*, Expression> memo_;
};

class Substituter {
 public:
  explicit Substituter(std::span<const Expression> repl) : repl_(repl) {}

  Expression s(const NodePtr& p) {
    if (auto it = memo_.find(p.get()); it != memo_.end()) return it->second;
    Expression r = compute(p);
    memo_.emplace(p.get(), r);
    return r;
  }

 private:
  Expression compute(const NodePtr& p) {
    const Node& n = *p;
    switch (n.op) {
      case Op::Const:
        return Expression(p);
      case Op::Var:
        if (n.index >= repl_.size()) {
          throw DimensionError("substitution covers " + std::to_string(repl_.size()) + " variables, expression uses x" +
                               std::to_string(n.index + 1));
        }
        return repl_[n.index];
      case Op::Neg:
        return -s(n.lhs);
      case Op::Sqrt:
        return sqrt(s(n.lhs));
      case Op::Exp:
        return exp(s(n.lhs));
      case Op::Log:
        return log(s(n.lhs));
      case Op::Sin:
        return sin(s(n.lhs));
      case Op::Cos:
        return cos(s(n.lhs));
      case Op::Add:
        return s(n.lhs) + s(n.rhs);
      case Op::Sub:
        return s(n.lhs) - s(n.rhs);
      case Op::Mul:
        return s(n.lhs) * s(n.rhs);
      case Op::Div:
        return s(n.lhs) / s(n.rhs);
      case Op::Pow:
        return pow(s(n.lhs), n.exponent);
    }
    return Expression();
  }

  std::span<const Expression> repl_;
  std::unordered_map<const Node*, Expression> memo_;
};

}  // namespace

Expression differentiate(const Expression& e, std::size_t index) { return Differentiator(index).d(e.ptr()); }

Expression substitute(const Expression& e, std::span<const Expression> replacement) {
  return Substituter(replacement).s(e.ptr());
}

double evaluate(const Expression& e, std::span<const double> point) {
  const std::size_t need = e.arity();
  if (point.size() < need) {
    throw DimensionError("point has " + std::to_string(point.size()) + " coordinates, expression needs " +
                         std::to_string(need));
  }
  return Tape(e)(point)[0];
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(const Expression& output) : Tape(std::span<const Expression>(&output, 1)) {}

Tape::Tape(std::span<const Expression> outputs) {
  std::unordered_map<const Node*, std::uint32_t> slot_of;
  // Iterative post-order traversal so deep trees do not overflow the stack.
  auto emit = [&](const NodePtr& root) -> std::uint32_t {
    std::vector<std::pair<const Node*, bool>> stack{{root.get(), false}};
    while (!stack.empty()) {
      auto [n, expanded] = stack.back();
      stack.pop_back();
      if (slot_of.count(n)) continue;
      if (!expanded) {
        stack.push_back({n, true});
        if (n->rhs && !slot_of.count(n->rhs.get())) stack.push_back({n->rhs.get(), false});
        if (n->lhs && !slot_of.count(n->lhs.get())) stack.push_back({n->lhs.get(), false});
        continue;
      }
      Instr ins{n->op};
      ins.value = n->value;
      if (n->op == Op::Var) {
        ins.a = static_cast<std::uint32_t>(n->index);
        arity_ = std::max(arity_, n->index + 1);
      }
      if (n->lhs) ins.a = slot_of.at(n->lhs.get());
      if (n->rhs) ins.b = slot_of.at(n->rhs.get());
      ins.pnum = n->exponent.num;
      ins.pden = n->exponent.den;
      slot_of.emplace(n, static_cast<std::uint32_t>(code_.size()));
      code_.push_back(ins);
    }
    return slot_of.at(root.get());
  };
  for (const Expression& e : outputs) outputs_.push_back(emit(e.ptr()));
}

bool Tape::run(std::span<const double> point, std::vector<double>& slots, double* scale) const {
  if (point.size() < arity_) {
    throw DimensionError("point has " + std::to_string(point.size()) + " coordinates, tape needs " +
                         std::to_string(arity_));
  }
  if (slots.size() < code_.size()) slots.resize(code_.size());
  double* s = slots.data();
  double biggest = 0.0;
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    double v = 0.0;
    switch (ins.op) {
      case Op::Const:
        v = ins.value;
        break;
      case Op::Var:
        v = point[ins.a];
        break;
      case Op::Neg:
        v = -s[ins.a];
        break;
      case Op::Sqrt:
        if (s[ins.a] < 0.0) return false;
        v = std::sqrt(s[ins.a]);
        break;
      case Op::Exp:
        v = std::exp(s[ins.a]);
        break;
      case Op::Log:
        if (s[ins.a] <= 0.0) return false;
        v = std::log(s[ins.a]);
        break;
      case Op::Sin:
        v = std::sin(s[ins.a]);
        break;
      case Op::Cos:
        v = std::cos(s[ins.a]);
        break;
      case Op::Add:
        v = s[ins.a] + s[ins.b];
        break;
      case Op::Sub:
        v = s[ins.a] - s[ins.b];
        break;
      case Op::Mul:
        v = s[ins.a] * s[ins.b];
        break;
      case Op::Div:
        if (s[ins.b] == 0.0) return false;
        v = s[ins.a] / s[ins.b];
        break;
      case Op::Pow:
        v = pow_value(s[ins.a], ins.pnum, ins.pden);
        break;
    }
    if (!std::isfinite(v)) return false;
    s[i] = v;
    if (scale) biggest = std::max(biggest, std::fabs(v));
  }
  if (scale) *scale = biggest;
  return true;
}

namespace {
// Scratch registers; per thread so that a Tape can be shared between threads.
std::vector<double>& scratch() {
  thread_local std::vector<double> slots;
  return slots;
}
}  // namespace

bool Tape::evaluate(std::span<const double> point, std::span<double> out) const {
  std::vector<double>& slots = scratch();
  if (!run(point, slots, nullptr)) return false;
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = slots[outputs_[k]];
  return true;
}

bool Tape::evaluate(std::span<const double> point, std::span<double> out, double& max_abs_subterm) const {
  std::vector<double>& slots = scratch();
  if (!run(point, slots, &max_abs_subterm)) return false;
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = slots[outputs_[k]];
  return true;
}

std::vector<double> Tape::operator()(std::span<const double> point) const {
  std::vector<double> out(outputs_.size());
  if (!evaluate(point, out)) throw UndefinedAtPoint("expression undefined at point");
  return out;
}

}  // namespace stochsym
