#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "stochsym/domain.hpp"
#include "stochsym/expr.hpp"

namespace stochsym {

using ExprVector = std::vector<Expression>;

/// Dense row-major matrix of expressions.
class ExprMatrix {
 public:
  ExprMatrix() = default;
  ExprMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  static ExprMatrix identity(std::size_t n);
  static ExprMatrix column(const ExprVector& v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const std::vector<Expression>& entries() const noexcept { return data_; }

  Expression& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Expression& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  ExprMatrix transpose() const;
  /// Applies f to every entry.
  template <typename F>
  ExprMatrix map(F&& f) const {
    ExprMatrix out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = f(data_[i]);
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Expression> data_;
};

ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator-(const ExprMatrix& a, const ExprMatrix& b);
ExprMatrix operator*(const Expression& s, const ExprMatrix& a);
ExprVector operator*(const ExprMatrix& a, const ExprVector& v);

/// Stochastic differential equation dX = mu(X) dt + sigma(X) dW on a domain.
struct Sde {
  std::size_t n = 0;  // state dimension
  std::size_t m = 0;  // Brownian dimension
  ExprVector mu;      // n entries
  ExprMatrix sigma;   // n x m
  Domain domain;

  Sde() = default;
  /// Throws DimensionError on inconsistent shapes.
  Sde(ExprVector mu, ExprMatrix sigma, Domain domain);
};

/// Finite stochastic transformation T = (Phi, B, eta): a diffeomorphism with an
/// explicit inverse, an SO(m)-valued rotation of the noise and a positive
/// time-change density.
struct FiniteTransformation {
  std::size_t n = 0;
  std::size_t m = 0;
  ExprVector phi;
  ExprVector phi_inverse;
  ExprMatrix B;  // m x m
  Expression eta;
  Domain domain;

  FiniteTransformation() = default;
  FiniteTransformation(ExprVector phi, ExprVector phi_inverse, ExprMatrix B, Expression eta, Domain domain);

  static FiniteTransformation identity(std::size_t n, std::size_t m, Domain domain);
};

/// Infinitesimal stochastic transformation V = (Y, C, tau).
struct InfinitesimalTransformation {
  std::size_t n = 0;
  std::size_t m = 0;
  ExprVector Y;
  ExprMatrix C;  // m x m, antisymmetric
  Expression tau;

  InfinitesimalTransformation() = default;
  InfinitesimalTransformation(ExprVector Y, ExprMatrix C, Expression tau);

  /// (Y, 0, 0).
  static InfinitesimalTransformation strong(ExprVector Y, std::size_t m);
};

/// Y(f) = Y^k d_k f.
Expression directional(const ExprVector& Y, const Expression& f);
ExprVector directional(const ExprVector& Y, const ExprVector& F);
ExprMatrix directional(const ExprVector& Y, const ExprMatrix& F);

/// A = 1/2 sigma sigma^T.
ExprMatrix diffusion_matrix(const Sde& sde);

/// L(f) = A^{ij} d_i d_j f + mu^i d_i f.
Expression generator_apply(const Sde& sde, const Expression& f);
ExprVector generator_apply(const Sde& sde, const ExprVector& F);

/// D(F)^l_i = d_i F^l, a k x n matrix.
ExprMatrix jacobian(const ExprVector& F, std::size_t n);

/// [A, B]^i_j = A^k d_k(B^i_j) - B^k_j d_k(A^i) for a vector field A on R^n and
/// an n x k matrix field B. For k = 1 this is the Lie bracket of vector fields.
ExprMatrix mixed_bracket(const ExprVector& A, const ExprMatrix& B);
ExprVector lie_bracket(const ExprVector& A, const ExprVector& B);

/// Componentwise composition F o G (substitutes G into every entry).
ExprVector compose(const ExprVector& F, const ExprVector& G);
ExprMatrix compose(const ExprMatrix& F, const ExprVector& G);
Expression compose(const Expression& f, const ExprVector& G);

/// Entrywise vanishing test of a vector or matrix of expressions.
ZeroTest zero_test(const ExprVector& v, const Domain& domain);
ZeroTest zero_test(const ExprMatrix& v, const Domain& domain);

/// One invariant checked by validate().
struct ValidationEntry {
  std::string name;
  bool passed = false;
  double worst = 0.0;  // largest sampled violation
  std::string detail;
};

struct ValidationReport {
  std::string subject;
  std::vector<ValidationEntry> entries;

  bool passed() const;
};

inline constexpr double kOrthogonalityTolerance = 1e-9;
inline constexpr double kDeterminantTolerance = 1e-6;
inline constexpr double kPsdTolerance = 1e-10;

/// Samples reuse the vanishing-test point set of the object's domain.
ValidationReport validate(const Sde& sde);
ValidationReport validate(const FiniteTransformation& T);
ValidationReport validate(const InfinitesimalTransformation& V, const Domain& domain);

}  // namespace stochsym
