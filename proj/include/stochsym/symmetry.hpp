#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stochsym/flow.hpp"
#include "stochsym/model.hpp"

namespace stochsym {

/// Residuals of the determining equations
///   Y(mu) - L(Y) + tau mu = 0,   [Y, sigma] + tau sigma / 2 + sigma C = 0
/// with a vanishing verdict per entry.
struct ResidualReport {
  ExprVector drift;       // n entries
  ExprMatrix diffusion;   // n x m
  std::vector<ZeroTest> drift_tests;
  std::vector<ZeroTest> diffusion_tests;  // row-major

  bool drift_zero() const;
  bool diffusion_zero() const;
  bool passed() const { return drift_zero() && diffusion_zero(); }
  double worst_drift() const;
  double worst_diffusion() const;
};

ResidualReport determining_residuals(const Sde& sde, const InfinitesimalTransformation& V);

bool is_weak_symmetry(const Sde& sde, const InfinitesimalTransformation& V);
/// Weak symmetry whose C and tau vanish identically.
bool is_strong_symmetry(const Sde& sde, const InfinitesimalTransformation& V);

/// Outcome of comparing E_T(mu, sigma) with (mu, sigma).
struct FiniteCheck {
  bool passed = false;
  double worst_drift = 0.0;      // largest |E_T(mu) - mu|
  double worst_diffusion = 0.0;  // largest |E_T(sigma) - sigma|
  double worst_relative = 0.0;   // largest deviation over its allowance
  std::size_t points = 0;
};

/// True iff transform_sde(T, sde) equals sde under componentwise is_zero.
FiniteCheck finite_symmetry_check(const Sde& sde, const FiniteTransformation& T);

/// The same test for a numeric flow (integrated with options.variational).
/// At a grid point p with q = Phi_a(p) it compares
///   (1/eta) (A^{jk}(p) d_j d_k Phi^i + mu^j(p) d_j Phi^i)  with  mu(q),
///   (1/sqrt(eta)) D(Phi) sigma(p) B^T                    with  sigma(q),
/// allowing (kZeroTolerance + 10 h^4 |a|) (1 + scale). Exited points are
/// skipped; fewer than 8 survivors raise DomainError.
FiniteCheck finite_symmetry_check(const Sde& sde, const FlowResult& flow);

/// [V1, V2] = ([Y1, Y2], Y1(C2) - Y2(C1) - (C1 C2 - C2 C1), Y1(tau2) - Y2(tau1)).
InfinitesimalTransformation bracket(const InfinitesimalTransformation& V1, const InfinitesimalTransformation& V2);

/// Structure constants f^k_{ij} with [V_i, V_j] = f^k_{ij} V_k, fitted by least
/// squares at the vanishing-test points.
struct StructureConstants {
  std::size_t k = 0;
  std::vector<double> f;  // f[(i * k + j) * k + l] = f^l_{ij}
  /// max over pairs of |A c - b| / (1 + |b|).
  double residual = 0.0;
  /// max |f^l_{ij} + f^l_{ji}|.
  double antisymmetry = 0.0;
  /// Whether each bracket [V_i, V_j] (row-major) is itself a weak symmetry.
  std::vector<bool> bracket_is_symmetry;

  double at(std::size_t i, std::size_t j, std::size_t l) const { return f[(i * k + j) * k + l]; }
  bool closed() const;
};

inline constexpr double kClosureTolerance = 1e-8;

/// Throws NotASymmetryError if a basis element is not a weak symmetry.
StructureConstants closure_check(const Sde& sde, std::span<const InfinitesimalTransformation> basis);

struct CommutationCheck {
  bool passed = false;
  Expression residual;  // Y(L f) - L(Y f) + tau L f
  ZeroTest test;
};

CommutationCheck generator_commutation(const Sde& sde, const InfinitesimalTransformation& V, const Expression& f);
bool generator_commutation_check(const Sde& sde, const InfinitesimalTransformation& V, const Expression& f);

/// Y_i(B) + B C_i = 0 and Y_i(eta) + tau_i eta = 0 for every basis element.
struct ReductionCheck {
  bool passed = false;
  std::vector<bool> rotation_ok;  // per basis element
  std::vector<bool> scale_ok;
  double worst = 0.0;
};

ReductionCheck strong_reduction_verify(std::span<const InfinitesimalTransformation> basis, const ExprMatrix& B,
                                       const Expression& eta, const Domain& domain);

struct ReductionOptions {
  double s_max = 0.5;              // flow-box half width in every parameter
  std::size_t points_per_axis = 11;
  double step = 1e-3;              // RK4 step
  double stencil = 1e-3;           // spacing of the derivative check
};

/// Numeric (B, eta) on a flow box around the anchor, with self-checks.
struct ReductionGrid {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<double> parameters;  // count x k
  std::vector<double> points;      // count x n
  std::vector<double> B;           // count x m*m
  std::vector<double> eta;         // count
  /// Largest |Y_i(B) + B C_i| and |Y_i(eta) + tau_i eta| at grid points, with
  /// Y_i derivatives taken by a five-point stencil along the flow parameters.
  double verify_residual = 0.0;
  /// Largest |C'_i| and |tau'_i| of the numeric push-forward by (id, B, eta).
  double pushforward_residual = 0.0;

  std::size_t size() const { return eta.size(); }
};

inline constexpr double kReductionTolerance = 1e-6;

/// Integrates dB/ds_i = -B C_i and d eta/ds_i = -tau_i eta along the commuting
/// flows of the Y_i starting from B = I, eta = 1 at the anchor. Throws
/// RankDeficiencyError when the Y_i(anchor) are not independent (singular
/// value <= 1e-8), NonCommutingBasisError when a pairwise bracket does not
/// vanish, FlowExitError when the box leaves the domain.
ReductionGrid strong_reduction_solve(std::span<const InfinitesimalTransformation> basis,
                                     std::span<const double> anchor, const Domain& domain,
                                     const ReductionOptions& options = {});

/// Largest entrywise distance between a numeric reduction and closed forms.
double grid_deviation(const ReductionGrid& grid, const ExprMatrix& B, const Expression& eta);

}  // namespace stochsym
