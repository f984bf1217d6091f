#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stochsym/errors.hpp"
#include "stochsym/io.hpp"
#include "stochsym/io_format.hpp"
#include "stochsym/transform.hpp"

#ifndef STOCHSYM_MODEL_DIR
#define STOCHSYM_MODEL_DIR "models"
#endif

namespace stochsym::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Largest distance allowed between a numeric reduction and a closed form.
constexpr double kClosedFormTolerance = 1e-5;
/// The source ensemble runs to this multiple of the transformed horizon.
constexpr double kSourceHorizonFactor = 15.0;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidModel : public std::runtime_error {
 public:
  InvalidModel(const std::string& what, json reports) : std::runtime_error(what), reports(std::move(reports)) {}
  json reports;
};

struct Options {
  std::string sde;
  std::string transform;
  std::vector<std::string> sym;
  std::string format = "text";
  std::string out;
  std::string models = STOCHSYM_MODEL_DIR;
  std::string fixture;
  std::uint64_t seed = 42;
  std::size_t paths = 10000;
  double dt = 1e-3;
  double horizon = 0.0;  // 0 selects the command default
  double a = 0.1;
  double step = 1e-4;
};

struct Context {
  explicit Context(const Options& o) : opt(o) {}

  const Options& opt;
  std::ostringstream text;
  json report = json::object();
};

struct Workspace {
  ModelFile model;
  std::vector<ValidationReport> reports;

  bool valid() const {
    return std::all_of(reports.begin(), reports.end(), [](const ValidationReport& r) { return r.passed(); });
  }
  json reports_json() const {
    json out = json::array();
    for (const ValidationReport& r : reports) out.push_back(to_json(r));
    return out;
  }
  std::size_t n() const { return model.sde.n; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const std::string& item : items) s += (s.empty() ? "" : ", ") + item;
  return s;
}

void print_vector(std::ostream& os, const std::string& label, const ExprVector& v, std::size_t n) {
  os << "  " << label << " = (";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << to_string(v[i], n);
  os << ")\n";
}

void print_matrix(std::ostream& os, const std::string& label, const ExprMatrix& M, std::size_t n) {
  os << "  " << label << " = [";
  for (std::size_t r = 0; r < M.rows(); ++r) {
    os << (r ? ", [" : "[");
    for (std::size_t c = 0; c < M.cols(); ++c) os << (c ? ", " : "") << to_string(M(r, c), n);
    os << "]";
  }
  os << "]\n";
}

/// Entries that pass the vanishing test on the domain are shown as 0.
void print_triad(std::ostream& os, const InfinitesimalTransformation& V, const Domain& domain) {
  auto shown = [&](const Expression& e) { return is_zero(e, domain) ? Expression() : e; };
  ExprVector Y;
  for (const Expression& e : V.Y) Y.push_back(shown(e));
  print_vector(os, "Y", Y, V.n);
  print_matrix(os, "C", V.C.map(shown), V.n);
  os << "  tau = " << to_string(shown(V.tau), V.n) << '\n';
}

void print_stats(std::ostream& os, const StatsReport& r) {
  os << "  " << r.subject << ": " << verdict(r.passed()) << " (" << r.samples_used << " of " << r.samples_total
     << " samples)\n";
  for (const Statistic& s : r.statistics) {
    os << "    " << s.name << " observed " << num(s.observed) << " expected " << num(s.expected);
    if (!std::isnan(s.standard_error)) os << " se " << num(s.standard_error);
    if (!std::isnan(s.p_value)) os << " p " << num(s.p_value);
    os << "  " << verdict(s.passed) << '\n';
  }
}

void print_validation(std::ostream& os, const std::vector<ValidationReport>& reports) {
  for (const ValidationReport& r : reports) {
    os << r.subject << ": " << verdict(r.passed()) << '\n';
    for (const ValidationEntry& e : r.entries) {
      os << "  " << e.name << "  " << verdict(e.passed);
      if (!e.passed) os << "  worst " << num(e.worst) << (e.detail.empty() ? "" : "  " + e.detail);
      os << '\n';
    }
  }
}

Workspace load_workspace(const fs::path& file) {
  if (file.empty()) throw UsageError("--sde FILE is required");
  if (!fs::exists(file)) throw UsageError("no such model file: " + file.string());
  Workspace w{load_model(file), {}};
  w.reports.push_back(validate(w.model.sde));
  w.reports.back().subject = "sde";
  for (const auto& [name, T] : w.model.transforms) {
    w.reports.push_back(validate(T));
    w.reports.back().subject = "transform " + name;
  }
  for (const auto& [name, V] : w.model.symmetries) {
    w.reports.push_back(validate(V, w.model.sde.domain));
    w.reports.back().subject = "symmetry " + name;
  }
  return w;
}

Workspace load_valid(const fs::path& file) {
  Workspace w = load_workspace(file);
  if (!w.valid()) throw InvalidModel("model file " + file.string() + " failed validation", w.reports_json());
  return w;
}

const InfinitesimalTransformation& symmetry(const Workspace& w, const std::string& name) {
  const auto it = w.model.symmetries.find(name);
  if (it == w.model.symmetries.end()) throw UsageError("unknown symmetry '" + name + "'");
  return it->second;
}

/// A transformation named in the model file, or a JSON file holding one.
FiniteTransformation transformation(const Workspace& w, const std::string& arg) {
  if (arg.empty()) throw UsageError("--transform is required");
  if (const auto it = w.model.transforms.find(arg); it != w.model.transforms.end()) return it->second;
  if (!fs::exists(arg)) throw UsageError("unknown transform '" + arg + "'");
  std::ifstream in(arg);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelFormatError(arg + ": " + e.what());
  }
  FiniteTransformation T = transform_from_json(doc, w.model.sde.n, w.model.sde.m, w.model.sde.domain, arg);
  ValidationReport r = validate(T);
  r.subject = "transform " + arg;
  if (!r.passed()) throw InvalidModel("transform " + arg + " failed validation", json::array({to_json(r)}));
  return T;
}

std::vector<double> anchor(const Workspace& w) {
  if (w.model.x0.empty()) throw UsageError("model file gives no initial point x0");
  return w.model.x0;
}

fs::path output_file(const Context& c, const std::string& name) {
  fs::create_directories(c.opt.out);
  return fs::path(c.opt.out) / name;
}

// ---------------------------------------------------------------------------
// Commands

/// Residual check of each named triad; true iff all are weak symmetries.
bool check_symmetries(Context& c, const Workspace& w, const std::vector<std::string>& names, json& out) {
  bool all = true;
  out = json::object();
  for (const std::string& name : names) {
    const InfinitesimalTransformation& V = symmetry(w, name);
    const ResidualReport r = determining_residuals(w.model.sde, V);
    const bool strong = r.passed() && is_strong_symmetry(w.model.sde, V);
    all = all && r.passed();
    json entry = to_json(r, w.n());
    entry["strong"] = strong;
    out[name] = entry;
    c.text << name << ": " << (r.passed() ? (strong ? "strong symmetry" : "weak symmetry") : "not a symmetry")
           << "  (drift residual " << num(r.worst_drift()) << ", diffusion residual " << num(r.worst_diffusion())
           << ")\n";
    if (r.passed()) continue;
    for (std::size_t i = 0; i < r.drift.size(); ++i)
      if (!r.drift_tests[i].zero) c.text << "  drift[" << i + 1 << "] = " << to_string(r.drift[i], w.n()) << '\n';
    for (std::size_t i = 0; i < r.diffusion.rows(); ++i)
      for (std::size_t a = 0; a < r.diffusion.cols(); ++a)
        if (!r.diffusion_tests[i * r.diffusion.cols() + a].zero)
          c.text << "  diffusion[" << i + 1 << "][" << a + 1 << "] = " << to_string(r.diffusion(i, a), w.n()) << '\n';
  }
  return all;
}

int cmd_check(Context& c) {
  const Workspace w = load_valid(c.opt.sde);
  json results;
  const bool ok = check_symmetries(c, w, c.opt.sym, results);
  c.report["symmetries"] = results;
  c.report["passed"] = ok;
  return ok ? kSuccess : kCheckFailed;
}

int cmd_validate(Context& c) {
  const Workspace w = load_workspace(c.opt.sde);
  print_validation(c.text, w.reports);
  c.report["reports"] = w.reports_json();
  c.report["passed"] = w.valid();
  return w.valid() ? kSuccess : kInvalid;
}

int cmd_transform(Context& c) {
  const Workspace w = load_valid(c.opt.sde);
  const FiniteTransformation T = transformation(w, c.opt.transform);
  ModelFile result;
  result.sde = transform_sde(T, w.model.sde);
  result.name = w.model.name + "_" + fs::path(c.opt.transform).stem().string();
  for (const Expression& e : T.phi)
    if (!w.model.x0.empty()) result.x0.push_back(evaluate(e, w.model.x0));
  c.text << "transformed SDE " << result.name << '\n';
  print_vector(c.text, "mu'", result.sde.mu, w.n());
  print_matrix(c.text, "sigma'", result.sde.sigma, w.n());
  c.report["model"] = to_json(result);
  if (!c.opt.out.empty()) {
    const fs::path file = output_file(c, result.name + ".json");
    std::ofstream(file) << to_json(result).dump(2) << '\n';
    c.text << "wrote " << file.string() << '\n';
  }
  c.report["passed"] = true;
  return kSuccess;
}

int cmd_bracket(Context& c) {
  if (c.opt.sym.size() < 2) throw UsageError("bracket needs at least two --sym names");
  const Workspace w = load_valid(c.opt.sde);
  std::vector<InfinitesimalTransformation> basis;
  for (const std::string& name : c.opt.sym) basis.push_back(symmetry(w, name));
  json brackets = json::array();
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = i + 1; j < basis.size(); ++j) {
      const InfinitesimalTransformation V = bracket(basis[i], basis[j]);
      const bool weak = is_weak_symmetry(w.model.sde, V);
      c.text << "[" << c.opt.sym[i] << ", " << c.opt.sym[j] << "]  weak symmetry: " << (weak ? "yes" : "no") << '\n';
      print_triad(c.text, V, w.model.sde.domain);
      json entry = to_json(V);
      entry["pair"] = {c.opt.sym[i], c.opt.sym[j]};
      entry["weak_symmetry"] = weak;
      brackets.push_back(entry);
    }
  c.report["brackets"] = brackets;
  bool ok = true;
  try {
    const StructureConstants s = closure_check(w.model.sde, basis);
    c.text << "closure: " << verdict(s.closed()) << "  (fit residual " << num(s.residual) << ")\n";
    for (std::size_t i = 0; i < s.k; ++i)
      for (std::size_t j = i + 1; j < s.k; ++j) {
        std::ostringstream terms;
        for (std::size_t l = 0; l < s.k; ++l)
          if (std::fabs(s.at(i, j, l)) > kClosureTolerance) terms << " " << num(s.at(i, j, l)) << "*" << c.opt.sym[l];
        c.text << "  [" << c.opt.sym[i] << ", " << c.opt.sym[j] << "] =" << (terms.str().empty() ? " 0" : terms.str())
               << '\n';
      }
    c.report["closure"] = to_json(s);
    ok = s.closed();
  } catch (const NotASymmetryError& e) {
    c.text << "closure: FAIL  (" << e.what() << ")\n";
    c.report["closure"] = {{"closed", false}, {"error", e.what()}};
    ok = false;
  }
  c.report["passed"] = ok;
  return ok ? kSuccess : kCheckFailed;
}

int cmd_pushforward(Context& c) {
  const Workspace w = load_valid(c.opt.sde);
  const FiniteTransformation T = transformation(w, c.opt.transform);
  const Sde target = transform_sde(T, w.model.sde);
  bool ok = true;
  json results = json::object();
  for (const std::string& name : c.opt.sym) {
    const InfinitesimalTransformation P = pushforward(T, symmetry(w, name));
    const bool weak = is_weak_symmetry(target, P);
    const bool strong = weak && is_strong_symmetry(target, P);
    ok = ok && weak;
    c.text << "T_*(" << name << "): " << (strong ? "strong symmetry" : weak ? "weak symmetry" : "not a symmetry")
           << " of E_T\n";
    print_triad(c.text, P, w.model.sde.domain);
    json entry = to_json(P);
    entry["weak_symmetry"] = weak;
    entry["strong_symmetry"] = strong;
    results[name] = entry;
  }
  c.report["pushforwards"] = results;
  c.report["passed"] = ok;
  return ok ? kSuccess : kCheckFailed;
}

void write_grid_csv(const fs::path& file, const ReductionGrid& g) {
  std::ofstream out(file);
  for (std::size_t i = 1; i <= g.k; ++i) out << "s" << i << ',';
  for (std::size_t i = 1; i <= g.n; ++i) out << "p" << i << ',';
  for (std::size_t r = 1; r <= g.m; ++r)
    for (std::size_t s = 1; s <= g.m; ++s) out << "B" << r << s << ',';
  out << "eta\n";
  for (std::size_t p = 0; p < g.size(); ++p) {
    for (std::size_t i = 0; i < g.k; ++i) out << format_double(g.parameters[p * g.k + i]) << ',';
    for (std::size_t i = 0; i < g.n; ++i) out << format_double(g.points[p * g.n + i]) << ',';
    for (std::size_t e = 0; e < g.m * g.m; ++e) out << format_double(g.B[p * g.m * g.m + e]) << ',';
    out << format_double(g.eta[p]) << '\n';
  }
}

/// Numeric reduction of the named basis from the model's x0, compared with a
/// closed-form (B, eta) when one is given.
bool run_reduction(Context& c, const Workspace& w, const std::vector<std::string>& names,
                   const FiniteTransformation* T, json& out) {
  std::vector<InfinitesimalTransformation> basis;
  for (const std::string& name : names) basis.push_back(symmetry(w, name));
  out = {{"basis", names}};
  bool ok = true;
  if (T) {
    const ReductionCheck v = strong_reduction_verify(basis, T->B, T->eta, w.model.sde.domain);
    c.text << "  closed form Y_i(B) = -B C_i, Y_i(eta) = -tau_i eta: " << verdict(v.passed) << "  (worst "
           << num(v.worst) << ")\n";
    out["verify"] = to_json(v);
    ok = v.passed;
  }
  try {
    const ReductionGrid g = strong_reduction_solve(basis, anchor(w), w.model.sde.domain);
    const bool solved = g.verify_residual <= kReductionTolerance && g.pushforward_residual <= kReductionTolerance;
    c.text << "  numeric solution on " << g.size() << " points: " << verdict(solved) << "  (equation residual "
           << num(g.verify_residual) << ", pushed-forward C and tau " << num(g.pushforward_residual) << ")\n";
    out["grid"] = to_json(g);
    ok = ok && solved;
    if (T) {
      const double deviation = grid_deviation(g, T->B, T->eta);
      const bool match = deviation <= kClosedFormTolerance;
      c.text << "  numeric vs closed form: " << verdict(match) << "  (max deviation " << num(deviation) << ")\n";
      out["closed_form_deviation"] = deviation;
      ok = ok && match;
    }
    if (!c.opt.out.empty()) write_grid_csv(output_file(c, "reduction.csv"), g);
  } catch (const Error& e) {
    c.text << "  numeric solution: FAIL  (" << e.what() << ")\n";
    out["error"] = e.what();
    ok = false;
  }
  out["passed"] = ok;
  return ok;
}

int cmd_reduce(Context& c) {
  const Workspace w = load_valid(c.opt.sde);
  std::optional<FiniteTransformation> T;
  if (!c.opt.transform.empty()) T = transformation(w, c.opt.transform);
  json result;
  c.text << "strong reduction of {" << join(c.opt.sym) << "}\n";
  const bool ok = run_reduction(c, w, c.opt.sym, T ? &*T : nullptr, result);
  c.report["reduction"] = result;
  c.report["passed"] = ok;
  return ok ? kSuccess : kCheckFailed;
}

SimConfig sim_config(const Context& c, const Workspace& w, double horizon) {
  SimConfig cfg;
  cfg.dt = c.opt.dt;
  cfg.horizon = horizon;
  cfg.paths = c.opt.paths;
  cfg.seed = c.opt.seed;
  cfg.x0 = anchor(w);
  return cfg;
}

/// Monte Carlo comparison of P_T applied to the model's ensemble with a
/// direct simulation of E_T, both read at transformed time t.
bool run_transformed_ensemble(Context& c, const Workspace& w, const FiniteTransformation& T, double t, json& out) {
  const SimConfig cfg = sim_config(c, w, kSourceHorizonFactor * t);
  const TransformedEnsemble r = transformed_ensemble_check(w.model.sde, T, cfg, t);
  const bool ok = r.passed() && r.short_paths == 0;
  c.text << "  " << cfg.paths << " paths, seed " << cfg.seed << ", dt " << num(cfg.dt) << ", transformed time "
         << num(t) << " (source horizon " << num(cfg.horizon) << ")\n";
  if (r.short_paths) c.text << "  " << r.short_paths << " paths did not reach the transformed time\n";
  print_stats(c.text, r.noise);
  print_stats(c.text, r.comparison);
  out = {{"noise", to_json(r.noise)},
         {"comparison", to_json(r.comparison)},
         {"short_paths", r.short_paths},
         {"transformed_time", t},
         {"source_horizon", cfg.horizon},
         {"passed", ok}};
  if (!c.opt.out.empty()) {
    std::ofstream csv(output_file(c, "transformed.csv"));
    write_csv_header(csv, w.model.sde.n, w.model.sde.m);
    const PathSimulator simulate(w.model.sde, cfg);
    for (std::size_t p = 0; p < cfg.paths; ++p) write_csv_rows(csv, p, process_transform(T, simulate(p)));
  }
  return ok;
}

int cmd_simulate(Context& c) {
  const Workspace w = load_valid(c.opt.sde);
  if (!c.opt.transform.empty()) {
    const FiniteTransformation T = transformation(w, c.opt.transform);
    const double t = c.opt.horizon > 0 ? c.opt.horizon : 0.2;
    json result;
    c.text << "transformed ensemble\n";
    const bool ok = run_transformed_ensemble(c, w, T, t, result);
    c.report["simulation"] = result;
    c.report["passed"] = ok;
    return ok ? kSuccess : kCheckFailed;
  }
  const SimConfig cfg = sim_config(c, w, c.opt.horizon > 0 ? c.opt.horizon : 1.0);
  const PathSimulator simulate(w.model.sde, cfg);
  BrownianCheck noise(w.model.sde.m, cfg.horizon);
  std::ofstream csv;
  if (!c.opt.out.empty()) {
    csv.open(output_file(c, "ensemble.csv"));
    write_csv_header(csv, w.model.sde.n, w.model.sde.m);
  }
  std::size_t killed = 0;
  std::vector<double> mean(w.model.sde.n, 0.0);
  for (std::size_t p = 0; p < cfg.paths; ++p) {
    const PathBundle path = simulate(p);
    noise.add(path);
    if (csv.is_open()) write_csv_rows(csv, p, path);
    if (path.killed) {
      ++killed;
      continue;
    }
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += path.x(path.stop)[i];
  }
  const std::size_t alive = cfg.paths - killed;
  for (double& v : mean) v = alive ? v / static_cast<double>(alive) : 0.0;
  const StatsReport r = noise.report();
  c.text << cfg.paths << " paths, seed " << cfg.seed << ", dt " << num(cfg.dt) << ", horizon " << num(cfg.horizon)
         << "; " << killed << " left the domain\n  mean X_T = (";
  for (std::size_t i = 0; i < mean.size(); ++i) c.text << (i ? ", " : "") << num(mean[i]);
  c.text << ")\n";
  print_stats(c.text, r);
  c.report["simulation"] = {{"paths", cfg.paths}, {"killed", killed}, {"mean_end_state", mean}, {"noise", to_json(r)}};
  c.report["passed"] = r.passed();
  return r.passed() ? kSuccess : kCheckFailed;
}

int cmd_flow(Context& c) {
  const Workspace w = load_valid(c.opt.sde);
  const std::vector<double> grid = w.model.sde.domain.sample_points();
  FlowOptions options;
  options.step = c.opt.step;
  options.drop_exits = true;
  options.variational = true;
  bool ok = true;
  json results = json::object();
  for (const std::string& name : c.opt.sym) {
    const FlowResult f = flow(symmetry(w, name), c.opt.a, grid, w.model.sde.domain, options);
    FiniteCheck check;
    try {
      check = finite_symmetry_check(w.model.sde, f);
    } catch (const DomainError& e) {
      c.text << name << " at a = " << num(c.opt.a) << ": FAIL  (" << e.what() << ")\n";
      results[name] = {{"passed", false}, {"error", e.what()}};
      ok = false;
      continue;
    }
    ok = ok && check.passed;
    c.text << name << " at a = " << num(c.opt.a) << ": " << verdict(check.passed) << "  (" << check.points
           << " points, drift deviation " << num(check.worst_drift) << ", diffusion deviation "
           << num(check.worst_diffusion) << ")\n";
    results[name] = to_json(check);
    if (!c.opt.out.empty()) {
      std::ofstream csv(output_file(c, "flow_" + name + ".csv"));
      write_csv(csv, f);
    }
  }
  c.report["flows"] = results;
  c.report["passed"] = ok;
  return ok ? kSuccess : kCheckFailed;
}

int cmd_example(Context& c) {
  const fs::path file = fs::path(c.opt.models) / (c.opt.fixture + ".json");
  if (c.opt.fixture.empty() || c.opt.fixture.find('/') != std::string::npos || !fs::exists(file))
    throw UsageError("unknown example '" + c.opt.fixture + "'");
  const Workspace w = load_workspace(file);
  json stages = json::array();
  std::vector<std::string> failed;
  auto stage = [&](const std::string& name, bool ok, json detail) {
    c.text << "[" << name << "] " << verdict(ok) << '\n';
    detail["stage"] = name;
    detail["passed"] = ok;
    stages.push_back(detail);
    if (!ok) failed.push_back(name);
  };
  auto finish = [&](int failure_code) {
    c.report["stages"] = stages;
    c.report["failed_stages"] = failed;
    c.report["passed"] = failed.empty();
    return failed.empty() ? kSuccess : failure_code;
  };

  std::ostringstream validation;
  print_validation(validation, w.reports);
  if (!w.valid()) c.text << validation.str();
  stage("validate", w.valid(), {{"reports", w.reports_json()}});
  if (!w.valid()) return finish(kInvalid);
  if (!w.model.pipeline) throw UsageError("model file " + file.string() + " has no pipeline block");
  const Pipeline& plan = *w.model.pipeline;

  json residuals;
  const bool symmetric = check_symmetries(c, w, plan.symmetries, residuals);
  stage("symmetries", symmetric, {{"symmetries", residuals}});

  std::vector<InfinitesimalTransformation> basis;
  for (const std::string& name : plan.symmetries) basis.push_back(symmetry(w, name));
  if (symmetric) {
    const StructureConstants s = closure_check(w.model.sde, basis);
    c.text << "  fit residual " << num(s.residual) << '\n';
    stage("closure", s.closed(), to_json(s));
  } else {
    stage("closure", false, {{"error", "not every basis element is a symmetry"}});
  }

  std::vector<std::string> weak, strong;
  for (const std::string& name : plan.symmetries)
    (is_strong_symmetry(w.model.sde, symmetry(w, name)) ? strong : weak).push_back(name);
  std::optional<FiniteTransformation> T;
  if (!plan.transform.empty()) T = w.model.transforms.at(plan.transform);
  if (!strong.empty()) c.text << "  already strong: " << join(strong) << '\n';
  if (weak.empty()) {
    stage("reduction", true, {{"skipped", strong}});
  } else {
    c.text << "  reducing {" << join(weak) << "}\n";
    json reduction;
    const bool ok = run_reduction(c, w, weak, T ? &*T : nullptr, reduction);
    reduction["skipped"] = strong;
    stage("reduction", ok, reduction);
  }
  if (!T) return finish(kCheckFailed);

  const Sde target = transform_sde(*T, w.model.sde);
  print_vector(c.text, "mu'", target.mu, w.n());
  print_matrix(c.text, "sigma'", target.sigma, w.n());
  const ValidationReport valid_target = validate(target);
  stage("transform", valid_target.passed(), {{"sde", to_json(target)}, {"validation", to_json(valid_target)}});

  bool all_strong = true;
  json pushed = json::object();
  for (const std::string& name : plan.symmetries) {
    const InfinitesimalTransformation P = pushforward(*T, symmetry(w, name));
    const bool ok = is_strong_symmetry(target, P);
    all_strong = all_strong && ok;
    c.text << "  T_*(" << name << ") strong: " << (ok ? "yes" : "no") << '\n';
    pushed[name] = to_json(P);
    pushed[name]["strong_symmetry"] = ok;
  }
  stage("strong symmetries", all_strong, {{"pushforwards", pushed}});

  json mc;
  const bool mc_ok = run_transformed_ensemble(c, w, *T, c.opt.horizon > 0 ? c.opt.horizon : 0.2, mc);
  stage("monte carlo", mc_ok, mc);
  return finish(kCheckFailed);
}

// ---------------------------------------------------------------------------
// Command line

void add_output(CLI::App* cmd, Options& o) {
  cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"text", "json"}));
  cmd->add_option("--out", o.out, "Directory for report.json and exported files");
}

void add_sde(CLI::App* cmd, Options& o) { cmd->add_option("--sde", o.sde, "Model file")->required(); }

void add_simulation(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--paths", o.paths, "Number of paths")->check(CLI::PositiveNumber);
  cmd->add_option("--dt", o.dt, "Time step")->check(CLI::PositiveNumber);
  cmd->add_option("--horizon", o.horizon, "Horizon (on the transformed clock when a transform is given)")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Stochastic transformations and symmetries of SDEs"};
  app.name("stochsym");
  app.require_subcommand(1);

  CLI::App* check = app.add_subcommand("check", "Determining-equation residuals of named triads");
  add_sde(check, o);
  check->add_option("--sym", o.sym, "Symmetry names")->required();
  add_output(check, o);

  CLI::App* transform = app.add_subcommand("transform", "Transformed SDE E_T(mu, sigma)");
  add_sde(transform, o);
  transform->add_option("--transform", o.transform, "Transform name or file")->required();
  add_output(transform, o);

  CLI::App* brackets = app.add_subcommand("bracket", "Pairwise brackets and structure constants");
  add_sde(brackets, o);
  brackets->add_option("--sym", o.sym, "Symmetry names")->required();
  add_output(brackets, o);

  CLI::App* push = app.add_subcommand("pushforward", "Push-forward of triads by a transformation");
  add_sde(push, o);
  push->add_option("--transform", o.transform, "Transform name or file")->required();
  push->add_option("--sym", o.sym, "Symmetry names")->required();
  add_output(push, o);

  CLI::App* reduce = app.add_subcommand("reduce", "Strong reduction of a commuting basis");
  add_sde(reduce, o);
  reduce->add_option("--sym", o.sym, "Basis names")->required();
  reduce->add_option("--transform", o.transform, "Closed-form (id, B, eta) to verify");
  add_output(reduce, o);

  CLI::App* simulate = app.add_subcommand("simulate", "Euler-Maruyama ensemble, optionally transformed");
  add_sde(simulate, o);
  simulate->add_option("--transform", o.transform, "Transform name or file");
  add_simulation(simulate, o);
  add_output(simulate, o);

  CLI::App* flows = app.add_subcommand("flow", "Finite symmetry check along numeric flows");
  add_sde(flows, o);
  flows->add_option("--sym", o.sym, "Symmetry names")->required();
  flows->add_option("--a", o.a, "Group parameter");
  flows->add_option("--step", o.step, "RK4 step")->check(CLI::PositiveNumber);
  add_output(flows, o);

  CLI::App* validate_cmd = app.add_subcommand("validate", "Validate every object of a model file");
  add_sde(validate_cmd, o);
  add_output(validate_cmd, o);

  CLI::App* example = app.add_subcommand("example", "End-to-end pipeline on a bundled model");
  example->add_option("fixture", o.fixture, "Model id, e.g. ex51 or bm2d")->required();
  example->add_option("--models", o.models, "Directory of bundled models");
  add_simulation(example, o);
  add_output(example, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  Context c{o};
  CLI::App* command = app.get_subcommands().front();
  c.report["command"] = command->get_name();
  auto fail = [&](const std::exception& e, int code) {
    err << "error: " << e.what() << '\n';
    c.report["error"] = e.what();
    c.report["passed"] = false;
    return code;
  };
  int code = kSuccess;
  try {
    const std::string name = command->get_name();
    if (name == "check") code = cmd_check(c);
    else if (name == "transform") code = cmd_transform(c);
    else if (name == "bracket") code = cmd_bracket(c);
    else if (name == "pushforward") code = cmd_pushforward(c);
    else if (name == "reduce") code = cmd_reduce(c);
    else if (name == "simulate") code = cmd_simulate(c);
    else if (name == "flow") code = cmd_flow(c);
    else if (name == "validate") code = cmd_validate(c);
    else code = cmd_example(c);
  } catch (const UsageError& e) {
    code = fail(e, kUsage);
  } catch (const InvalidModel& e) {
    code = fail(e, kInvalid);
    c.report["reports"] = e.reports;
    for (const json& r : e.reports) {
      c.text << r["subject"].get<std::string>() << ": " << verdict(r["passed"].get<bool>()) << '\n';
      for (const json& entry : r["entries"])
        if (!entry["passed"].get<bool>()) c.text << "  " << entry["name"].get<std::string>() << "  FAIL\n";
    }
  } catch (const ModelFormatError& e) {
    code = fail(e, kInvalid);
  } catch (const DimensionError& e) {
    code = fail(e, kInvalid);
  } catch (const std::exception& e) {
    code = fail(e, kCheckFailed);
  }
  c.report["exit_code"] = code;
  if (o.format == "json") out << c.report.dump(2) << '\n';
  else out << c.text.str();
  if (!o.out.empty()) std::ofstream(output_file(c, "report.json")) << c.report.dump(2) << '\n';
  return code;
}

}  // namespace stochsym::cli
