#include "stochsym/symmetry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "stochsym/errors.hpp"
#include "stochsym/transform.hpp"

namespace stochsym {

namespace {

bool all_zero(const std::vector<ZeroTest>& tests) {
  return std::all_of(tests.begin(), tests.end(), [](const ZeroTest& t) { return t.zero; });
}

double worst_of(const std::vector<ZeroTest>& tests) {
  double w = 0.0;
  for (const ZeroTest& t : tests) w = std::max(w, t.worst);
  return w;
}

void require_same_shape(const Sde& sde, const InfinitesimalTransformation& V) {
  if (sde.n != V.n || sde.m != V.m) throw DimensionError("SDE and infinitesimal transformation dimensions differ");
}

/// Y, C and tau flattened in that order.
std::vector<Expression> components(const InfinitesimalTransformation& V) {
  std::vector<Expression> out = V.Y;
  out.insert(out.end(), V.C.entries().begin(), V.C.entries().end());
  out.push_back(V.tau);
  return out;
}

}  // namespace

bool ResidualReport::drift_zero() const { return all_zero(drift_tests); }
bool ResidualReport::diffusion_zero() const { return all_zero(diffusion_tests); }
double ResidualReport::worst_drift() const { return worst_of(drift_tests); }
double ResidualReport::worst_diffusion() const { return worst_of(diffusion_tests); }

ResidualReport determining_residuals(const Sde& sde, const InfinitesimalTransformation& V) {
  require_same_shape(sde, V);
  ResidualReport report;
  report.drift.resize(sde.n);
  for (std::size_t i = 0; i < sde.n; ++i) {
    report.drift[i] = directional(V.Y, sde.mu[i]) - generator_apply(sde, V.Y[i]) + V.tau * sde.mu[i];
  }
  report.diffusion = mixed_bracket(V.Y, sde.sigma) + (0.5 * V.tau) * sde.sigma + sde.sigma * V.C;
  for (const Expression& e : report.drift) report.drift_tests.push_back(zero_test(e, sde.domain));
  for (const Expression& e : report.diffusion.entries()) report.diffusion_tests.push_back(zero_test(e, sde.domain));
  return report;
}

bool is_weak_symmetry(const Sde& sde, const InfinitesimalTransformation& V) {
  return determining_residuals(sde, V).passed();
}

bool is_strong_symmetry(const Sde& sde, const InfinitesimalTransformation& V) {
  return is_weak_symmetry(sde, V) && zero_test(V.C, sde.domain).zero && is_zero(V.tau, sde.domain);
}

FiniteCheck finite_symmetry_check(const Sde& sde, const FiniteTransformation& T) {
  const Sde image = transform_sde(T, sde);
  FiniteCheck check;
  check.points = kZeroSamples;
  bool ok = true;
  for (std::size_t i = 0; i < sde.n; ++i) {
    const ZeroTest t = zero_test(image.mu[i] - sde.mu[i], sde.domain);
    ok = ok && t.zero;
    check.worst_drift = std::max(check.worst_drift, t.worst);
    check.worst_relative = std::max(check.worst_relative, t.worst_relative / kZeroTolerance);
  }
  const ZeroTest s = zero_test(image.sigma - sde.sigma, sde.domain);
  check.worst_diffusion = s.worst;
  check.worst_relative = std::max(check.worst_relative, s.worst_relative / kZeroTolerance);
  check.passed = ok && s.zero;
  return check;
}

FiniteCheck finite_symmetry_check(const Sde& sde, const FlowResult& flow) {
  const std::size_t n = sde.n;
  const std::size_t m = sde.m;
  if (flow.n != n || flow.m != m) throw DimensionError("flow and SDE dimensions differ");
  if (flow.surviving() < 8) throw DomainError("fewer than 8 flow samples stayed in the domain");

  std::vector<Expression> coeffs = sde.mu;
  coeffs.insert(coeffs.end(), sde.sigma.entries().begin(), sde.sigma.entries().end());
  const Tape tape(coeffs);
  const double allowance = kZeroTolerance + 10.0 * std::pow(flow.step, 4) * std::fabs(flow.a);

  FiniteCheck check;
  check.passed = true;
  std::vector<double> at_p(coeffs.size()), at_q(coeffs.size());
  for (const FlowSample& s : flow.samples) {
    if (s.exited) continue;
    if (s.J.empty()) throw DimensionError("flow was integrated without variational derivatives");
    if (!tape.evaluate(s.point, at_p) || !tape.evaluate(s.phi, at_q)) continue;
    ++check.points;
    const double* mu = at_p.data();
    const double* sigma = mu + n;
    double scale = 0.0;
    for (double v : at_p) scale = std::max(scale, std::fabs(v));
    for (double v : at_q) scale = std::max(scale, std::fabs(v));

    std::vector<double> mu_image(n, 0.0), sigma_image(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        v += mu[j] * s.J[i * n + j];
        for (std::size_t k = 0; k < n; ++k) {
          double a = 0.0;
          for (std::size_t r = 0; r < m; ++r) a += 0.5 * sigma[j * m + r] * sigma[k * m + r];
          v += a * s.H[(i * n + j) * n + k];
        }
      }
      mu_image[i] = v / s.eta;
    }
    const double root = std::sqrt(s.eta);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < m; ++c) {
        double v = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t r = 0; r < m; ++r) v += s.J[i * n + j] * sigma[j * m + r] * s.B[c * m + r];
        sigma_image[i * m + c] = v / root;
      }
    }
    for (double v : mu_image) scale = std::max(scale, std::fabs(v));
    for (double v : sigma_image) scale = std::max(scale, std::fabs(v));
    const double limit = allowance * (1.0 + scale);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::fabs(mu_image[i] - at_q[i]);
      check.worst_drift = std::max(check.worst_drift, d);
      check.worst_relative = std::max(check.worst_relative, d / limit);
    }
    for (std::size_t e = 0; e < n * m; ++e) {
      const double d = std::fabs(sigma_image[e] - at_q[n + e]);
      check.worst_diffusion = std::max(check.worst_diffusion, d);
      check.worst_relative = std::max(check.worst_relative, d / limit);
    }
  }
  if (check.points < 8) throw DomainError("fewer than 8 flow samples have defined coefficients");
  check.passed = check.worst_relative <= 1.0;
  return check;
}

InfinitesimalTransformation bracket(const InfinitesimalTransformation& V1, const InfinitesimalTransformation& V2) {
  if (V1.n != V2.n || V1.m != V2.m) throw DimensionError("bracket of transformations of different dimensions");
  ExprVector Y = lie_bracket(V1.Y, V2.Y);
  ExprMatrix C = directional(V1.Y, V2.C) - directional(V2.Y, V1.C) - (V1.C * V2.C - V2.C * V1.C);
  Expression tau = directional(V1.Y, V2.tau) - directional(V2.Y, V1.tau);
  return InfinitesimalTransformation(std::move(Y), std::move(C), std::move(tau));
}

bool StructureConstants::closed() const {
  return residual < kClosureTolerance && antisymmetry <= 1e-9 &&
         std::all_of(bracket_is_symmetry.begin(), bracket_is_symmetry.end(), [](bool b) { return b; });
}

StructureConstants closure_check(const Sde& sde, std::span<const InfinitesimalTransformation> basis) {
  const std::size_t k = basis.size();
  for (std::size_t i = 0; i < k; ++i) {
    if (!is_weak_symmetry(sde, basis[i])) {
      throw NotASymmetryError("basis element " + std::to_string(i + 1) + " is not a symmetry of the SDE");
    }
  }
  StructureConstants out;
  out.k = k;
  out.f.assign(k * k * k, 0.0);
  out.bracket_is_symmetry.assign(k * k, true);
  if (k == 0) return out;

  const std::vector<double> pts = sde.domain.sample_points();
  const std::size_t n = sde.n;
  const std::size_t count = pts.size() / n;
  const std::size_t width = n + sde.m * sde.m + 1;

  auto sample = [&](const InfinitesimalTransformation& V, Eigen::Ref<Eigen::VectorXd> column) {
    const Tape tape(components(V));
    std::vector<double> values(width);
    for (std::size_t p = 0; p < count; ++p) {
      if (!tape.evaluate(std::span<const double>(pts.data() + p * n, n), values)) {
        throw UndefinedAtPoint("basis element undefined at a sample point");
      }
      for (std::size_t c = 0; c < width; ++c) column(p * width + c) = values[c];
    }
  };

  Eigen::MatrixXd A(count * width, k);
  for (std::size_t i = 0; i < k; ++i) sample(basis[i], A.col(i));
  const auto solver = A.colPivHouseholderQr();
  Eigen::VectorXd b(count * width);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const InfinitesimalTransformation W = bracket(basis[i], basis[j]);
      out.bracket_is_symmetry[i * k + j] = is_weak_symmetry(sde, W);
      sample(W, b);
      const Eigen::VectorXd c = solver.solve(b);
      out.residual = std::max(out.residual, (A * c - b).norm() / (1.0 + b.norm()));
      for (std::size_t l = 0; l < k; ++l) out.f[(i * k + j) * k + l] = c(l);
    }
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t l = 0; l < k; ++l) out.antisymmetry = std::max(out.antisymmetry, std::fabs(out.at(i, j, l) + out.at(j, i, l)));
  return out;
}

CommutationCheck generator_commutation(const Sde& sde, const InfinitesimalTransformation& V, const Expression& f) {
  require_same_shape(sde, V);
  const Expression Lf = generator_apply(sde, f);
  CommutationCheck check;
  check.residual = directional(V.Y, Lf) - generator_apply(sde, directional(V.Y, f)) + V.tau * Lf;
  check.test = zero_test(check.residual, sde.domain);
  check.passed = check.test.zero;
  return check;
}

bool generator_commutation_check(const Sde& sde, const InfinitesimalTransformation& V, const Expression& f) {
  return generator_commutation(sde, V, f).passed;
}

ReductionCheck strong_reduction_verify(std::span<const InfinitesimalTransformation> basis, const ExprMatrix& B,
                                       const Expression& eta, const Domain& domain) {
  ReductionCheck check;
  check.passed = true;
  for (const InfinitesimalTransformation& V : basis) {
    if (B.rows() != V.m || B.cols() != V.m || V.n != domain.dimension()) {
      throw DimensionError("reduction candidate and basis dimensions differ");
    }
    const ZeroTest rot = zero_test(directional(V.Y, B) + B * V.C, domain);
    const ZeroTest sc = zero_test(directional(V.Y, eta) + V.tau * eta, domain);
    check.rotation_ok.push_back(rot.zero);
    check.scale_ok.push_back(sc.zero);
    check.worst = std::max({check.worst, rot.worst, sc.worst});
    check.passed = check.passed && rot.zero && sc.zero;
  }
  return check;
}

// ---------------------------------------------------------------------------
// Numeric strong reduction

namespace {

/// State (x, B, eta) transported along the flow of one basis element with
/// dB/ds = -B C(x), d eta/ds = -tau(x) eta.
struct Transport {
  std::size_t n, m;
  Tape tape;  // Y, C, tau

  void rhs(const std::vector<double>& s, std::vector<double>& ds, std::vector<double>& values) const {
    if (!tape.evaluate(std::span<const double>(s.data(), n), values)) {
      throw UndefinedAtPoint("basis element undefined along its flow");
    }
    const double* Y = values.data();
    const double* C = Y + n;
    const double tau = C[m * m];
    const double* B = s.data() + n;
    for (std::size_t i = 0; i < n; ++i) ds[i] = Y[i];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double v = 0.0;
        for (std::size_t r = 0; r < m; ++r) v += B[i * m + r] * C[r * m + j];
        ds[n + i * m + j] = -v;
      }
    }
    ds[n + m * m] = -tau * s[n + m * m];
  }

  void advance(std::vector<double>& s, double param, double step, const Domain& domain) const {
    if (param == 0.0) return;
    const std::size_t steps = static_cast<std::size_t>(std::ceil(std::fabs(param) / step - 1e-9));
    const double h = param / static_cast<double>(steps);
    const std::size_t size = s.size();
    std::vector<double> k1(size), k2(size), k3(size), k4(size), tmp(size), values(n + m * m + 1);
    for (std::size_t q = 0; q < steps; ++q) {
      rhs(s, k1, values);
      for (std::size_t i = 0; i < size; ++i) tmp[i] = s[i] + h / 2 * k1[i];
      rhs(tmp, k2, values);
      for (std::size_t i = 0; i < size; ++i) tmp[i] = s[i] + h / 2 * k2[i];
      rhs(tmp, k3, values);
      for (std::size_t i = 0; i < size; ++i) tmp[i] = s[i] + h * k3[i];
      rhs(tmp, k4, values);
      for (std::size_t i = 0; i < size; ++i) s[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      if (!domain.contains(std::span<const double>(s.data(), n))) {
        throw FlowExitError("reduction flow box leaves the domain", h * static_cast<double>(q + 1));
      }
    }
  }
};

}  // namespace

ReductionGrid strong_reduction_solve(std::span<const InfinitesimalTransformation> basis,
                                     std::span<const double> anchor, const Domain& domain,
                                     const ReductionOptions& options) {
  const std::size_t k = basis.size();
  const std::size_t n = domain.dimension();
  if (k == 0 || k > n) throw DimensionError("reduction needs between 1 and n basis elements");
  const std::size_t m = basis[0].m;
  for (const InfinitesimalTransformation& V : basis) {
    if (V.n != n || V.m != m) throw DimensionError("basis elements have inconsistent dimensions");
  }
  if (anchor.size() != n) throw DimensionError("anchor has the wrong dimension");
  if (!domain.contains(anchor)) throw DomainError("anchor lies outside the domain");

  Eigen::MatrixXd frame(n, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t r = 0; r < n; ++r) frame(r, i) = evaluate(basis[i].Y[r], anchor);
  }
  const Eigen::VectorXd singular = Eigen::JacobiSVD<Eigen::MatrixXd>(frame).singularValues();
  if (singular.minCoeff() <= 1e-8) {
    throw RankDeficiencyError("basis vector fields are linearly dependent at the anchor");
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const InfinitesimalTransformation W = bracket(basis[i], basis[j]);
      if (!zero_test(components(W), domain).zero) {
        throw NonCommutingBasisError("basis elements " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                                     " do not commute");
      }
    }
  }

  std::vector<Transport> transports;
  for (const InfinitesimalTransformation& V : basis) transports.push_back(Transport{n, m, Tape(components(V))});

  const std::size_t state = n + m * m + 1;
  auto solve_at = [&](const std::vector<double>& params) {
    std::vector<double> s(state, 0.0);
    std::copy(anchor.begin(), anchor.end(), s.begin());
    for (std::size_t i = 0; i < m; ++i) s[n + i * m + i] = 1.0;
    s[n + m * m] = 1.0;
    for (std::size_t i = 0; i < k; ++i) transports[i].advance(s, params[i], options.step, domain);
    return s;
  };

  ReductionGrid grid;
  grid.n = n;
  grid.m = m;
  grid.k = k;
  const std::size_t per_axis = std::max<std::size_t>(options.points_per_axis, 1);
  std::size_t total = 1;
  for (std::size_t i = 0; i < k; ++i) total *= per_axis;

  const double d = options.stencil;
  std::vector<double> values(n + m * m + 1);
  for (std::size_t g = 0; g < total; ++g) {
    std::vector<double> params(k);
    std::size_t rest = g;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t l = rest % per_axis;
      rest /= per_axis;
      params[i] = per_axis == 1 ? 0.0
                                : -options.s_max + 2.0 * options.s_max * static_cast<double>(l) /
                                                       static_cast<double>(per_axis - 1);
    }
    const std::vector<double> s = solve_at(params);
    grid.parameters.insert(grid.parameters.end(), params.begin(), params.end());
    grid.points.insert(grid.points.end(), s.begin(), s.begin() + n);
    grid.B.insert(grid.B.end(), s.begin() + n, s.begin() + n + m * m);
    grid.eta.push_back(s[n + m * m]);

    const double* B = s.data() + n;
    const double eta = s[n + m * m];
    for (std::size_t i = 0; i < k; ++i) {
      // Five-point stencil for the derivative along s_i, which is Y_i(.) because the flows commute.
      std::vector<double> deriv(state, 0.0);
      const double weights[4] = {1.0, -8.0, 8.0, -1.0};
      const double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
      for (int c = 0; c < 4; ++c) {
        std::vector<double> shifted = params;
        shifted[i] += offsets[c] * d;
        const std::vector<double> t = solve_at(shifted);
        for (std::size_t e = 0; e < state; ++e) deriv[e] += weights[c] * t[e] / (12.0 * d);
      }
      if (!transports[i].tape.evaluate(std::span<const double>(s.data(), n), values)) {
        throw UndefinedAtPoint("basis element undefined on the reduction grid");
      }
      const double* C = values.data() + n;
      const double tau = C[m * m];
      const double* dB = deriv.data() + n;
      const double deta = deriv[n + m * m];
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
          double bc = 0.0, bcbt = 0.0, dbbt = 0.0;
          for (std::size_t q = 0; q < m; ++q) {
            bc += B[r * m + q] * C[q * m + c];
            dbbt += dB[r * m + q] * B[c * m + q];
            for (std::size_t u = 0; u < m; ++u) bcbt += B[r * m + q] * C[q * m + u] * B[c * m + u];
          }
          grid.verify_residual = std::max(grid.verify_residual, std::fabs(dB[r * m + c] + bc));
          grid.pushforward_residual = std::max(grid.pushforward_residual, std::fabs(bcbt + dbbt));
        }
      }
      grid.verify_residual = std::max(grid.verify_residual, std::fabs(deta + tau * eta));
      grid.pushforward_residual = std::max(grid.pushforward_residual, std::fabs(tau + deta / eta));
    }
  }
  return grid;
}

double grid_deviation(const ReductionGrid& grid, const ExprMatrix& B, const Expression& eta) {
  std::vector<Expression> outputs = B.entries();
  outputs.push_back(eta);
  const Tape tape(outputs);
  std::vector<double> values(outputs.size());
  const std::size_t mm = grid.m * grid.m;
  double worst = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!tape.evaluate(std::span<const double>(grid.points).subspan(g * grid.n, grid.n), values))
      throw UndefinedAtPoint("closed form undefined on the reduction grid");
    for (std::size_t e = 0; e < mm; ++e) worst = std::max(worst, std::fabs(values[e] - grid.B[g * mm + e]));
    worst = std::max(worst, std::fabs(values[mm] - grid.eta[g]));
  }
  return worst;
}

}  // namespace stochsym
