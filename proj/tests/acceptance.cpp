// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "stochsym/io.hpp"
#include "stochsym/simulate.hpp"
#include "stochsym/symmetry.hpp"
#include "stochsym/transform.hpp"
#include "triads.hpp"

namespace {

using namespace stochsym;
using namespace stochsym::testing;

const std::string kModels = STOCHSYM_MODEL_DIR;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<Outcome()> body;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

ExprVector vec(std::initializer_list<const char*> items) {
  ExprVector v;
  for (const char* s : items) v.push_back(parse(s, 2));
  return v;
}

ExprMatrix mat(std::initializer_list<std::initializer_list<const char*>> rows) {
  ExprMatrix M(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (const char* s : row) M(i, j++) = parse(s, 2);
    ++i;
  }
  return M;
}

const ModelFile& ex51() {
  static const ModelFile m = load_model(kModels + "/ex51.json");
  return m;
}

const ModelFile& bm2d() {
  static const ModelFile m = load_model(kModels + "/bm2d.json");
  return m;
}

std::vector<InfinitesimalTransformation> certified(const ModelFile& m) {
  std::vector<InfinitesimalTransformation> out;
  for (const std::string& name : m.pipeline->symmetries) out.push_back(m.symmetries.at(name));
  return out;
}

SimConfig config(std::size_t paths, double dt, double horizon, std::vector<double> x0) {
  SimConfig c;
  c.paths = paths;
  c.dt = dt;
  c.horizon = horizon;
  c.seed = 42;
  c.x0 = std::move(x0);
  return c;
}

/// Sample mean of |X_T|^2 over surviving paths and its standard error.
std::pair<double, double> square_radius(const Sde& sde, const SimConfig& cfg, std::size_t& killed) {
  const PathSimulator simulate(sde, cfg);
  double s = 0, q = 0;
  std::size_t count = 0;
  killed = 0;
  for (std::size_t p = 0; p < cfg.paths; ++p) {
    const PathBundle path = simulate(p);
    if (path.killed) {
      ++killed;
      continue;
    }
    const auto x = path.x(path.stop);
    const double r2 = x[0] * x[0] + x[1] * x[1];
    s += r2;
    q += r2 * r2;
    ++count;
  }
  const double mean = s / count;
  return {mean, std::sqrt((q / count - mean * mean) / count)};
}

// ---------------------------------------------------------------------------

Outcome symmetry_certification() {
  const ModelFile& m = ex51();
  const ResidualReport r1 = determining_residuals(m.sde, m.symmetries.at("V1"));
  const ResidualReport r2 = determining_residuals(m.sde, m.symmetries.at("V2"));
  InfinitesimalTransformation perturbed = m.symmetries.at("V1");
  perturbed.tau = Expression::constant(1);
  const ResidualReport rp = determining_residuals(m.sde, perturbed);
  std::ostringstream d;
  d << "V1 " << (r1.passed() ? "vanishes" : "nonzero") << ", V2 " << (r2.passed() ? "vanishes" : "nonzero")
    << ", V1 with tau=1 " << (rp.passed() ? "vanishes" : "fails") << " (drift residual " << num(rp.worst_drift())
    << ")";
  return {r1.passed() && r2.passed() && !rp.passed(), d.str()};
}

Outcome transformed_sde() {
  const ModelFile& m = ex51();
  const Sde E = transform_sde(m.transforms.at("T_displayed"), m.sde);
  const ZeroTest mu = zero_test(ExprMatrix::column(E.mu) - ExprMatrix::column(vec({"x", "y"})), m.sde.domain);
  const ZeroTest sigma = zero_test(E.sigma - mat({{"x", "y"}, {"-y", "x"}}), m.sde.domain);
  std::ostringstream d;
  d << "displayed (id, B, eta): |mu' - (x,y)| <= " << num(mu.worst) << ", |sigma' - [[x,y],[-y,x]]| <= "
    << num(sigma.worst);
  return {mu.zero && sigma.zero, d.str()};
}

/// The three reduction checks for one closed-form (B, eta).
struct ReductionFindings {
  bool verify = false;
  double deviation = 0.0;
  bool solve = false;
  bool strong = false;

  bool passed() const { return verify && solve && strong; }
  std::string describe() const {
    return std::string("verify ") + (verify ? "pass" : "FAIL") + ", solve vs closed form " + num(deviation) +
           (solve ? " pass" : " FAIL") + ", T_*(V) strong " + (strong ? "pass" : "FAIL");
  }
};

ReductionFindings reduction_findings(const FiniteTransformation& T) {
  const ModelFile& m = ex51();
  const auto basis = certified(m);
  ReductionFindings f;
  f.verify = strong_reduction_verify(basis, T.B, T.eta, m.sde.domain).passed;
  const ReductionGrid grid = strong_reduction_solve(basis, std::vector<double>{1.0, 0.0}, m.sde.domain);
  f.deviation = grid_deviation(grid, T.B, T.eta);
  f.solve = f.deviation <= 1e-5 && grid.verify_residual <= kReductionTolerance;
  const Sde E = transform_sde(T, m.sde);
  f.strong = true;
  for (const InfinitesimalTransformation& V : basis) f.strong = f.strong && is_strong_symmetry(E, pushforward(T, V));
  return f;
}

Outcome strong_reduction() {
  const ReductionFindings displayed = reduction_findings(ex51().transforms.at("T_displayed"));
  if (displayed.passed()) return {true, "displayed B: " + displayed.describe()};
  const ReductionFindings other = reduction_findings(ex51().transforms.at("T"));
  return {false, "displayed B: " + displayed.describe() + " | opposite root B = [[x/r, y/r], [-y/r, x/r]]: " +
                     other.describe()};
}

Outcome brownian_symmetries() {
  const ModelFile& m = bm2d();
  const auto basis = certified(m);
  bool weak = true;
  for (const InfinitesimalTransformation& V : basis) weak = weak && is_weak_symmetry(m.sde, V);
  const InfinitesimalTransformation cr = InfinitesimalTransformation::strong(vec({"y", "-x"}), 2);
  const ResidualReport r = determining_residuals(m.sde, cr);
  const bool counterexample = !r.passed() && std::fabs(r.worst_diffusion() - 1.0) <= 1e-9;
  const StructureConstants s = closure_check(m.sde, basis);
  std::ostringstream d;
  d << "V1..V4 weak " << (weak ? "yes" : "no") << ", ((y,-x),0,0) diffusion residual " << num(r.worst_diffusion())
    << ", closure " << (s.closed() ? "closed" : "open") << " with fit residual " << num(s.residual);
  return {weak && counterexample && s.closed() && s.residual < 1e-8, d.str()};
}

Outcome commutation_suite() {
  std::size_t total = 0, passed = 0;
  for (const ModelFile* m : {&ex51(), &bm2d()})
    for (const InfinitesimalTransformation& V : certified(*m))
      for (const char* f : {"x", "y", "x*y", "x^2+y^2"}) {
        ++total;
        passed += generator_commutation_check(m->sde, V, parse(f, 2));
      }
  return {passed == total, std::to_string(passed) + "/" + std::to_string(total) + " (sde, V, f) triples commute"};
}

Outcome monte_carlo() {
  const ModelFile& m = ex51();
  const double t = 0.2;
  const SimConfig cfg = config(10000, 1e-3, 3.0, {1.0, 0.0});
  const TransformedEnsemble r = transformed_ensemble_check(m.sde, m.transforms.at("T_displayed"), cfg, t);
  std::ostringstream d;
  d << "P_T(W) Brownian " << (r.noise.passed() ? "yes" : "no") << "; two-sample " << (r.comparison.passed() ? "pass" : "FAIL")
    << " on " << r.transformed.size() / 2 << " vs " << r.direct.size() / 2 << " states at t'=" << t << ":";
  for (const Statistic& s : r.comparison.statistics) {
    d << " " << s.name << (std::isnan(s.p_value) ? " z=" + num((s.observed - s.expected) / s.standard_error)
                                                 : " p=" + num(s.p_value));
    d << ",";
  }
  d << " short paths " << r.short_paths;
  return {r.passed() && r.short_paths == 0, d.str()};
}

Outcome moment_oracles() {
  const ModelFile& m = ex51();
  const double T = 0.2;
  std::size_t killed_a = 0, killed_b = 0;
  const auto [a, se_a] = square_radius(m.sde, config(10000, 1e-3, T, {1.0, 0.0}), killed_a);
  const Sde E = transform_sde(m.transforms.at("T_displayed"), m.sde);
  const auto [b, se_b] = square_radius(E, config(10000, 1e-3, T, {1.0, 0.0}), killed_b);
  const double za = (a - (1 + 4 * T)) / se_a, zb = (b - std::exp(4 * T)) / se_b;
  std::ostringstream d;
  d << "E|X_T|^2 = " << num(a) << " vs " << num(1 + 4 * T) << " (z=" << num(za) << "), E|X'_T|^2 = " << num(b)
    << " vs " << num(std::exp(4 * T)) << " (z=" << num(zb) << "), killed " << killed_a << "/" << killed_b;
  return {std::fabs(za) <= 3 && std::fabs(zb) <= 3, d.str()};
}

Outcome group_laws() {
  std::mt19937_64 rng(2024);
  const Domain d = Domain::cube(2, 1.5);
  int ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const FiniteTransformation A = random_triad(rng, d), B = random_triad(rng, d), C = random_triad(rng, d);
    const FiniteTransformation id = FiniteTransformation::identity(2, 2, d);
    const bool assoc = same_triad(compose(compose(C, B), A), compose(C, compose(B, A)), d);
    const bool unit = same_triad(compose(id, A), A, d) && same_triad(compose(A, id), A, d);
    const bool inverse = same_triad(compose(invert(A), A), id, d) && same_triad(compose(A, invert(A)), id, d);
    ok += assoc && unit && inverse;
  }
  const ModelFile& m = ex51();
  auto constant = [&](double c) {
    return FiniteTransformation(vec({"x", "y"}), vec({"x", "y"}), ExprMatrix::identity(2), Expression::constant(c),
                                m.sde.domain);
  };
  const double dt = 1e-3;
  const PathSimulator simulate(m.sde, config(100, dt, 0.5, {1.0, 0.0}));
  std::vector<PathBundle> paths;
  for (std::size_t p = 0; p < 100; ++p) paths.push_back(simulate(p));
  const double deviation = composition_pathwise_deviation(constant(2), constant(3), paths);
  const double bound = kCompositionConstant * std::sqrt(dt);
  std::ostringstream s;
  s << ok << "/20 random triads satisfy associativity, identity and inverse laws; eta (2,3) vs 6 pathwise deviation "
    << num(deviation) << " <= " << num(bound);
  return {ok == 20 && deviation <= bound, s.str()};
}

Outcome functoriality() {
  std::mt19937_64 rng(77);
  const Domain d = Domain::cube(2, 1.5);
  int sde_ok = 0, push_ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Sde sde = random_sde(rng, d);
    const InfinitesimalTransformation V = random_infinitesimal(rng);
    const FiniteTransformation T1 = random_triad(rng, d), T2 = random_triad(rng, d);
    sde_ok += same_sde(transform_sde(compose(T2, T1), sde), transform_sde(T2, transform_sde(T1, sde)), d);
    push_ok += same_infinitesimal(pushforward(compose(T2, T1), V), pushforward(T2, pushforward(T1, V)), d);
  }
  return {sde_ok == 20 && push_ok == 20, "E_T: " + std::to_string(sde_ok) + "/20 pairs, T_*: " +
                                             std::to_string(push_ok) + "/20 pairs"};
}

Outcome flow_consistency() {
  FlowOptions options;
  options.step = 1e-4;
  options.drop_exits = true;
  options.variational = true;
  int total = 0, ok = 0;
  double worst = 0.0;
  for (const ModelFile* m : {&ex51(), &bm2d()}) {
    const std::vector<double> grid = m->sde.domain.sample_points();
    for (const InfinitesimalTransformation& V : certified(*m))
      for (double a : {0.1, 0.2}) {
        ++total;
        const FiniteCheck c = finite_symmetry_check(m->sde, flow(V, a, grid, m->sde.domain, options));
        ok += c.passed;
        worst = std::max(worst, c.worst_relative);
      }
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                           " (V, a) flows pass; worst deviation over allowance " + num(worst)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "ex51 symmetry certification", 1, symmetry_certification},
      {2, "ex51 transformed SDE", 1, transformed_sde},
      {3, "ex51 strong reduction", 10, strong_reduction},
      {4, "Brownian symmetries and closure", 2, brownian_symmetries},
      {5, "generator commutation suite", 2, commutation_suite},
      {6, "Monte Carlo solution map", 120, monte_carlo},
      {7, "moment oracles", 60, moment_oracles},
      {8, "group laws", 60, group_laws},
      {9, "functoriality", 10, functoriality},
      {10, "flow consistency", 30, flow_consistency},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.limit_seconds;
    const bool passed = o.passed && in_time;
    failures += !passed;
    std::cout << "criterion " << c.id << ": " << (passed ? "PASS" : "FAIL") << "  " << c.title << "  ["
              << num(seconds) << " s, limit " << c.limit_seconds << " s" << (in_time ? "" : ", TOO SLOW") << "]  "
              << o.detail << std::endl;
  }
  std::cout << (10 - failures) << "/10 criteria pass" << std::endl;
  return failures == 0 ? 0 : 1;
}
