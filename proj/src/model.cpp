#include "stochsym/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stochsym/errors.hpp"

namespace stochsym {

// ---------------------------------------------------------------------------
// ExprMatrix

ExprMatrix ExprMatrix::identity(std::size_t n) {
  ExprMatrix I(n, n);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = Expression::constant(1.0);
  return I;
}

ExprMatrix ExprMatrix::column(const ExprVector& v) {
  ExprMatrix c(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) c(i, 0) = v[i];
  return c;
}

ExprMatrix ExprMatrix::transpose() const {
  ExprMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

ExprMatrix operator*(const ExprMatrix& a, const ExprMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matrix product shape mismatch");
  ExprMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      Expression s;
      for (std::size_t k = 0; k < a.cols(); ++k) s = s + a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

ExprMatrix operator+(const ExprMatrix& a, const ExprMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix sum shape mismatch");
  ExprMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, j);
  return out;
}

ExprMatrix operator-(const ExprMatrix& a, const ExprMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix difference shape mismatch");
  ExprMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, j);
  return out;
}

ExprMatrix operator*(const Expression& s, const ExprMatrix& a) {
  return a.map([&](const Expression& e) { return s * e; });
}

ExprVector operator*(const ExprMatrix& a, const ExprVector& v) {
  if (a.cols() != v.size()) throw DimensionError("matrix-vector shape mismatch");
  ExprVector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    Expression s;
    for (std::size_t k = 0; k < a.cols(); ++k) s = s + a(i, k) * v[k];
    out[i] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Domain types

namespace {

void require_arity(const Expression& e, std::size_t n, const char* what) {
  if (e.arity() > n) {
    throw DimensionError(std::string(what) + " uses x" + std::to_string(e.arity()) + " but the state dimension is " +
                         std::to_string(n));
  }
}

void require_arity(const ExprVector& v, std::size_t n, const char* what) {
  for (const Expression& e : v) require_arity(e, n, what);
}

void require_arity(const ExprMatrix& M, std::size_t n, const char* what) {
  for (const Expression& e : M.entries()) require_arity(e, n, what);
}

}  // namespace

Sde::Sde(ExprVector mu_, ExprMatrix sigma_, Domain domain_)
    : n(mu_.size()), m(sigma_.cols()), mu(std::move(mu_)), sigma(std::move(sigma_)), domain(std::move(domain_)) {
  if (n == 0) throw DimensionError("SDE needs at least one state variable");
  if (sigma.rows() != n) throw DimensionError("sigma must have n rows");
  if (m == 0) throw DimensionError("SDE needs at least one Brownian component");
  if (domain.dimension() != n) throw DimensionError("domain dimension differs from the state dimension");
  require_arity(mu, n, "drift");
  require_arity(sigma, n, "diffusion");
}

FiniteTransformation::FiniteTransformation(ExprVector phi_, ExprVector phi_inverse_, ExprMatrix B_, Expression eta_,
                                           Domain domain_)
    : n(phi_.size()),
      m(B_.rows()),
      phi(std::move(phi_)),
      phi_inverse(std::move(phi_inverse_)),
      B(std::move(B_)),
      eta(std::move(eta_)),
      domain(std::move(domain_)) {
  if (n == 0) throw DimensionError("transformation needs at least one state variable");
  if (phi_inverse.size() != n) throw DimensionError("phi and phi_inverse must have the same length");
  if (B.cols() != m || m == 0) throw DimensionError("B must be a non-empty square matrix");
  if (domain.dimension() != n) throw DimensionError("domain dimension differs from the state dimension");
  require_arity(phi, n, "phi");
  require_arity(phi_inverse, n, "phi_inverse");
  require_arity(B, n, "B");
  require_arity(eta, n, "eta");
}

FiniteTransformation FiniteTransformation::identity(std::size_t n, std::size_t m, Domain domain) {
  ExprVector id(n);
  for (std::size_t i = 0; i < n; ++i) id[i] = Expression::variable(i);
  return FiniteTransformation(id, id, ExprMatrix::identity(m), Expression::constant(1.0), std::move(domain));
}

InfinitesimalTransformation::InfinitesimalTransformation(ExprVector Y_, ExprMatrix C_, Expression tau_)
    : n(Y_.size()), m(C_.rows()), Y(std::move(Y_)), C(std::move(C_)), tau(std::move(tau_)) {
  if (n == 0) throw DimensionError("vector field needs at least one component");
  if (C.cols() != m || m == 0) throw DimensionError("C must be a non-empty square matrix");
  require_arity(Y, n, "Y");
  require_arity(C, n, "C");
  require_arity(tau, n, "tau");
}

InfinitesimalTransformation InfinitesimalTransformation::strong(ExprVector Y, std::size_t m) {
  return InfinitesimalTransformation(std::move(Y), ExprMatrix(m, m), Expression());
}

// ---------------------------------------------------------------------------
// Differential operators

Expression directional(const ExprVector& Y, const Expression& f) {
  Expression s;
  for (std::size_t k = 0; k < Y.size(); ++k) {
    if (Y[k].is_constant(0.0)) continue;
    s = s + Y[k] * differentiate(f, k);
  }
  return s;
}

ExprVector directional(const ExprVector& Y, const ExprVector& F) {
  ExprVector out(F.size());
  for (std::size_t i = 0; i < F.size(); ++i) out[i] = directional(Y, F[i]);
  return out;
}

ExprMatrix directional(const ExprVector& Y, const ExprMatrix& F) {
  return F.map([&](const Expression& e) { return directional(Y, e); });
}

ExprMatrix diffusion_matrix(const Sde& sde) {
  return Expression::constant(0.5) * (sde.sigma * sde.sigma.transpose());
}

Expression generator_apply(const Sde& sde, const Expression& f) {
  if (f.arity() > sde.n) throw DimensionError("function uses more variables than the SDE state dimension");
  const ExprMatrix A = diffusion_matrix(sde);
  Expression result;
  for (std::size_t i = 0; i < sde.n; ++i) {
    const Expression di = differentiate(f, i);
    result = result + sde.mu[i] * di;
    for (std::size_t j = 0; j < sde.n; ++j) {
      if (A(i, j).is_constant(0.0)) continue;
      result = result + A(i, j) * differentiate(di, j);
    }
  }
  return result;
}

ExprVector generator_apply(const Sde& sde, const ExprVector& F) {
  ExprVector out(F.size());
  for (std::size_t i = 0; i < F.size(); ++i) out[i] = generator_apply(sde, F[i]);
  return out;
}

ExprMatrix jacobian(const ExprVector& F, std::size_t n) {
  ExprMatrix D(F.size(), n);
  for (std::size_t l = 0; l < F.size(); ++l) {
    if (F[l].arity() > n) throw DimensionError("jacobian: entry uses more than n variables");
    for (std::size_t i = 0; i < n; ++i) D(l, i) = differentiate(F[l], i);
  }
  return D;
}

ExprMatrix mixed_bracket(const ExprVector& A, const ExprMatrix& B) {
  const std::size_t n = A.size();
  if (B.rows() != n) throw DimensionError("mixed bracket: B must have as many rows as A has components");
  const ExprMatrix DA = jacobian(A, n);
  ExprMatrix out(n, B.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < B.cols(); ++j) {
      Expression s = directional(A, B(i, j));
      for (std::size_t k = 0; k < n; ++k) {
        if (B(k, j).is_constant(0.0) || DA(i, k).is_constant(0.0)) continue;
        s = s - B(k, j) * DA(i, k);
      }
      out(i, j) = s;
    }
  }
  return out;
}

ExprVector lie_bracket(const ExprVector& A, const ExprVector& B) {
  const ExprMatrix r = mixed_bracket(A, ExprMatrix::column(B));
  ExprVector out(r.rows());
  for (std::size_t i = 0; i < r.rows(); ++i) out[i] = r(i, 0);
  return out;
}

Expression compose(const Expression& f, const ExprVector& G) { return substitute(f, G); }

ExprVector compose(const ExprVector& F, const ExprVector& G) {
  ExprVector out(F.size());
  for (std::size_t i = 0; i < F.size(); ++i) out[i] = substitute(F[i], G);
  return out;
}

ExprMatrix compose(const ExprMatrix& F, const ExprVector& G) {
  return F.map([&](const Expression& e) { return substitute(e, G); });
}

namespace {

ZeroTest merge(ZeroTest acc, const ZeroTest& t) {
  acc.zero = acc.zero && t.zero;
  acc.worst = std::max(acc.worst, t.worst);
  acc.worst_relative = std::max(acc.worst_relative, t.worst_relative);
  acc.defined_points = acc.defined_points == 0 ? t.defined_points : std::min(acc.defined_points, t.defined_points);
  return acc;
}

}  // namespace

ZeroTest zero_test(const ExprVector& v, const Domain& domain) {
  ZeroTest acc;
  acc.zero = true;
  for (const Expression& e : v) acc = merge(acc, zero_test(e, domain));
  return acc;
}

ZeroTest zero_test(const ExprMatrix& v, const Domain& domain) { return zero_test(v.entries(), domain); }

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const ValidationEntry& e) { return e.passed; });
}

namespace {

struct Samples {
  std::vector<double> points;
  std::size_t n;
  std::size_t count() const { return points.size() / n; }
  std::span<const double> at(std::size_t k) const { return {points.data() + k * n, n}; }
};

Samples samples_of(const Domain& d) { return Samples{d.sample_points(), d.dimension()}; }

Eigen::MatrixXd eval_matrix(const Tape& tape, std::span<const double> p, std::size_t rows, std::size_t cols, bool& ok) {
  std::vector<double> buf(rows * cols);
  ok = tape.evaluate(p, buf);
  Eigen::MatrixXd M(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) M(i, j) = buf[i * cols + j];
  return M;
}

ValidationEntry defined_entry(const std::string& name, std::size_t defined, std::size_t total) {
  ValidationEntry e{name, defined == total, static_cast<double>(total - defined), {}};
  e.detail = std::to_string(defined) + "/" + std::to_string(total) + " sample points defined";
  return e;
}

ValidationEntry zero_entry(const std::string& name, const ZeroTest& t) {
  return ValidationEntry{name, t.zero, t.worst, "relative residual " + std::to_string(t.worst_relative)};
}

}  // namespace

ValidationReport validate(const Sde& sde) {
  ValidationReport report{"sde", {}};
  const Samples s = samples_of(sde.domain);
  ExprVector all = sde.mu;
  all.insert(all.end(), sde.sigma.entries().begin(), sde.sigma.entries().end());
  const Tape coeffs(all);
  const Tape sigma_tape(sde.sigma.entries());

  std::size_t defined = 0;
  double worst_eig = 0.0;
  std::vector<double> out(all.size());
  for (std::size_t k = 0; k < s.count(); ++k) {
    if (!coeffs.evaluate(s.at(k), out)) continue;
    ++defined;
    bool ok = false;
    const Eigen::MatrixXd sig = eval_matrix(sigma_tape, s.at(k), sde.n, sde.m, ok);
    const Eigen::MatrixXd A = 0.5 * sig * sig.transpose();
    const double lowest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues()(0);
    worst_eig = std::min(worst_eig, lowest);
  }
  report.entries.push_back(defined_entry("coefficients defined", defined, s.count()));
  report.entries.push_back(ValidationEntry{"A = sigma sigma^T / 2 positive semidefinite", worst_eig >= -kPsdTolerance,
                                           -worst_eig, "smallest sampled eigenvalue " + std::to_string(worst_eig)});
  return report;
}

ValidationReport validate(const FiniteTransformation& T) {
  ValidationReport report{"transformation", {}};
  const Samples s = samples_of(T.domain);
  const Tape b_tape(T.B.entries());
  const Tape eta_tape(T.eta);

  double worst_orth = 0.0, worst_det = 0.0, lowest_eta = std::numeric_limits<double>::infinity();
  std::size_t b_defined = 0, eta_defined = 0;
  for (std::size_t k = 0; k < s.count(); ++k) {
    bool ok = false;
    const Eigen::MatrixXd B = eval_matrix(b_tape, s.at(k), T.m, T.m, ok);
    if (ok) {
      ++b_defined;
      const Eigen::MatrixXd G = B.transpose() * B - Eigen::MatrixXd::Identity(T.m, T.m);
      worst_orth = std::max(worst_orth, G.cwiseAbs().maxCoeff());
      worst_det = std::max(worst_det, std::fabs(B.determinant() - 1.0));
    }
    double eta = 0.0;
    if (eta_tape.evaluate(s.at(k), std::span<double>(&eta, 1))) {
      ++eta_defined;
      lowest_eta = std::min(lowest_eta, eta);
    }
  }
  report.entries.push_back(defined_entry("B defined", b_defined, s.count()));
  report.entries.push_back(ValidationEntry{"B orthogonal", b_defined > 0 && worst_orth <= kOrthogonalityTolerance,
                                           worst_orth, "max |B^T B - I|"});
  report.entries.push_back(
      ValidationEntry{"det B = 1", b_defined > 0 && worst_det <= kDeterminantTolerance, worst_det, "max |det B - 1|"});
  report.entries.push_back(defined_entry("eta defined", eta_defined, s.count()));
  report.entries.push_back(ValidationEntry{"eta positive", eta_defined > 0 && lowest_eta >= T.domain.margin(),
                                           std::max(0.0, T.domain.margin() - lowest_eta),
                                           "smallest sampled eta " + std::to_string(lowest_eta)});

  ExprVector round_trip = compose(T.phi_inverse, T.phi);
  for (std::size_t i = 0; i < T.n; ++i) round_trip[i] = round_trip[i] - Expression::variable(i);
  try {
    report.entries.push_back(zero_entry("phi_inverse o phi = id", zero_test(round_trip, T.domain)));
  } catch (const UndecidableError& e) {
    report.entries.push_back(ValidationEntry{"phi_inverse o phi = id", false, 0.0, e.what()});
  }
  return report;
}

ValidationReport validate(const InfinitesimalTransformation& V, const Domain& domain) {
  ValidationReport report{"infinitesimal transformation", {}};
  if (domain.dimension() != V.n) throw DimensionError("domain dimension differs from the vector field dimension");
  const ExprMatrix sym = V.C + V.C.transpose();
  try {
    report.entries.push_back(zero_entry("C antisymmetric", zero_test(sym, domain)));
  } catch (const UndecidableError& e) {
    report.entries.push_back(ValidationEntry{"C antisymmetric", false, 0.0, e.what()});
  }
  return report;
}

}  // namespace stochsym
