#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stochsym/model.hpp"

namespace stochsym {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Independent standard normals for (seed, path, step); any out.size().
/// The step index must be below 2^32.
void standard_normals(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::span<double> out);

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  std::size_t paths = 1000;
  std::uint64_t seed = 42;
  std::vector<double> x0;
  /// Brownian increments are drawn on the grid dt / substeps and summed, so
  /// runs at dt and dt / 2 share one Brownian path.
  std::size_t substeps = 1;
};

/// Discretised solution pair (X, W) on a uniform grid t_k = k dt, k = 0..stop.
struct PathBundle {
  std::size_t n = 0;
  std::size_t m = 0;
  double dt = 0.0;
  std::size_t steps = 0;  // nominal number of steps
  std::size_t stop = 0;   // last stored node
  bool killed = false;    // the path left the domain before its nominal end
  std::vector<double> X;  // (stop + 1) x n
  std::vector<double> W;  // (stop + 1) x m
  /// For transformed paths: the source time alpha(t_k) of every node.
  std::vector<double> clock;

  double time(std::size_t k) const { return static_cast<double>(k) * dt; }
  double horizon() const { return time(stop); }
  std::span<const double> x(std::size_t k) const { return {X.data() + k * n, n}; }
  std::span<const double> w(std::size_t k) const { return {W.data() + k * m, m}; }
};

/// Euler-Maruyama simulator with the coefficients compiled once. Paths are
/// independent of each other and of the order in which they are requested.
class PathSimulator {
 public:
  /// Throws DomainError if x0 lies outside the domain.
  PathSimulator(const Sde& sde, SimConfig config);
  PathBundle operator()(std::size_t path) const;

 private:
  Sde sde_;
  SimConfig config_;
  Tape tape_;
};

/// Euler-Maruyama X_{k+1} = X_k + mu(X_k) dt + sigma(X_k) dW_k for one path,
/// truncated when X leaves the SDE domain. Throws DomainError if x0 lies
/// outside the domain.
PathBundle euler_maruyama_path(const Sde& sde, const SimConfig& config, std::size_t path);
std::vector<PathBundle> euler_maruyama(const Sde& sde, const SimConfig& config);

/// P_T(X, W): clock beta_k = sum_{j<k} eta(X_j) dt, noise increments
/// sqrt(eta(X_k)) B(X_k) dW_k, states Phi(X_k); both resampled by linear
/// interpolation on the uniform grid of stop steps over [0, beta_stop].
/// Throws DomainError when eta is not positive along the path and
/// std::invalid_argument for a path without steps.
PathBundle process_transform(const FiniteTransformation& T, const PathBundle& path);

struct PathState {
  std::vector<double> x;
  std::vector<double> w;
};

/// Linear interpolation of the path at time t, or nullopt beyond its horizon.
std::optional<PathState> state_at(const PathBundle& path, double t);

/// max |P_T2(P_T1(X, W)) - P_{T2 o T1}(X, W)| over paths and over the nodes of
/// the composite grid covered by both.
double composition_pathwise_deviation(const FiniteTransformation& T1, const FiniteTransformation& T2,
                                      std::span<const PathBundle> paths);

/// Constant of the pathwise composition threshold c sqrt(dt).
inline constexpr double kCompositionConstant = 5.0;

struct Statistic {
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double standard_error = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  bool passed = false;
};

struct StatsReport {
  std::string subject;
  std::vector<Statistic> statistics;
  std::size_t samples_used = 0;
  std::size_t samples_total = 0;

  bool passed() const;
  double alive_fraction() const;
};

inline constexpr double kStandardErrors = 3.0;
inline constexpr double kKsLevel = 0.01;

/// Streaming Brownian-motion diagnostics of W on [0, T]: increment means,
/// E[W_T^a W_T^a] = T and realised covariations sum dW^a dW^b = 0, each within
/// three standard errors. Paths whose horizon ends before T are counted but
/// not used.
class BrownianCheck {
 public:
  BrownianCheck(std::size_t m, double T);
  void add(const PathBundle& path);
  /// Throws std::invalid_argument with fewer than 100 usable paths.
  StatsReport report() const;

 private:
  std::size_t m_;
  double T_;
  std::size_t used_ = 0;
  std::size_t total_ = 0;
  std::size_t increments_ = 0;
  std::vector<double> inc_sum_, inc_sq_;
  std::vector<double> end_sq_sum_, end_sq_sq_;  // moments of (W_T^a)^2
  std::vector<double> cov_sum_, cov_sq_;        // per pair a < b
};

StatsReport brownian_check(std::span<const PathBundle> paths, double T);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Compares two ensembles of states (row-major, dim columns): means and
/// second moments within three pooled standard errors, KS p > 0.01 per
/// coordinate. Throws std::invalid_argument below 1000 samples per side.
StatsReport two_sample_check(std::span<const double> a, std::span<const double> b, std::size_t dim);

/// P_T applied to an ensemble of sde read at transformed time t, against a
/// direct simulation of E_T(sde) from Phi(x0) to horizon t.
struct TransformedEnsemble {
  std::vector<double> transformed;  // states of P_T(X) at t, row-major
  std::vector<double> direct;       // states of the direct simulation at t
  StatsReport noise;                // brownian_check of P_T(W) on [0, t]
  StatsReport comparison;           // two_sample_check(transformed, direct)
  std::size_t short_paths = 0;      // surviving paths whose clock ended before t

  bool passed() const { return noise.passed() && comparison.passed(); }
};

/// config.horizon is the source horizon and must carry the clock past t. The
/// direct ensemble uses seed + 1 with the same dt and path count.
TransformedEnsemble transformed_ensemble_check(const Sde& sde, const FiniteTransformation& T,
                                               const SimConfig& config, double t);

/// CSV with header path,k,t,X1..Xn,W1..Wm.
void write_csv(std::ostream& out, std::span<const PathBundle> paths);
/// Streaming pieces of write_csv.
void write_csv_header(std::ostream& out, std::size_t n, std::size_t m);
void write_csv_rows(std::ostream& out, std::size_t index, const PathBundle& path);

}  // namespace stochsym
