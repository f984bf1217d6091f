#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "stochsym/domain.hpp"
#include "stochsym/model.hpp"

namespace stochsym {

struct FlowOptions {
  /// Integrator step; 0 selects 1e-3 * |a|.
  double step = 0.0;
  /// Drop grid points whose trajectory leaves the domain instead of throwing.
  bool drop_exits = false;
  /// Also integrate the first and second derivatives of Phi_a with respect to
  /// the starting point (needed by finite symmetry checks).
  bool variational = false;
};

/// Values of the one-parameter group generated by V at one grid point.
struct FlowSample {
  std::vector<double> point;  // starting point p
  std::vector<double> phi;    // Phi_a(p)
  std::vector<double> B;      // B_a(p), m x m row-major
  double eta = 1.0;           // eta_a(p)
  std::vector<double> J;      // d Phi_a / dp, n x n row-major (variational only)
  std::vector<double> H;      // H[i][j][k] = d_j d_k Phi_a^i, n^3 (variational only)
  bool exited = false;
  double exit_parameter = 0.0;
};

/// Numeric (Phi_a, B_a, eta_a) on a point grid, integrated from
///   d Phi = Y(Phi), d B = C(Phi) B, d eta = tau(Phi) eta,
/// with Phi_0 = id, B_0 = I, eta_0 = 1 by the classical RK4 scheme.
struct FlowResult {
  double a = 0.0;
  double step = 0.0;
  std::size_t steps = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<FlowSample> samples;

  std::size_t surviving() const;
};

/// Integrates the flow of V for parameter a from every grid point (row-major,
/// count x n). Points outside the domain, or trajectories leaving it, raise
/// FlowExitError unless options.drop_exits is set.
FlowResult flow(const InfinitesimalTransformation& V, double a, std::span<const double> grid, const Domain& domain,
                const FlowOptions& options = {});

/// CSV with header a,p1..pn,phi1..phin,B11..Bmm,eta; exited samples are skipped.
void write_csv(std::ostream& out, const FlowResult& result);

}  // namespace stochsym
