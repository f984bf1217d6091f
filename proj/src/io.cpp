#include "stochsym/io.hpp"

#include <fstream>

#include "stochsym/errors.hpp"

namespace stochsym {

using nlohmann::json;

namespace {

Expression entry(const json& j, std::size_t n, const std::string& where) {
  if (j.is_number()) return Expression::constant(j.get<double>());
  if (!j.is_string()) throw ModelFormatError(where + ": expected an expression string");
  try {
    return parse(j.get<std::string>(), n);
  } catch (const ParseError& e) {
    throw ModelFormatError(where + ": " + e.what());
  }
}

ExprVector vector_field(const json& j, std::size_t size, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != size)
    throw DimensionError(where + ": expected an array of " + std::to_string(size) + " expressions");
  ExprVector v;
  for (std::size_t i = 0; i < size; ++i) v.push_back(entry(j[i], n, where + "[" + std::to_string(i) + "]"));
  return v;
}

ExprMatrix matrix_field(const json& j, std::size_t rows, std::size_t cols, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != rows)
    throw DimensionError(where + ": expected " + std::to_string(rows) + " rows");
  ExprMatrix M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const ExprVector row = vector_field(j[r], cols, n, where + "[" + std::to_string(r) + "]");
    for (std::size_t c = 0; c < cols; ++c) M(r, c) = row[c];
  }
  return M;
}

ExprVector coordinates(std::size_t n) {
  ExprVector v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(Expression::variable(i));
  return v;
}

template <typename T>
T required(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ModelFormatError(std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ModelFormatError(std::string("field '") + key + "' has the wrong type");
  }
}

Domain domain_from_json(const json& j, std::size_t n) {
  const auto box = required<std::vector<std::array<double, 2>>>(j, "box");
  if (box.size() != n) throw DimensionError("domain.box: expected " + std::to_string(n) + " intervals");
  std::vector<Interval> intervals;
  for (const auto& b : box) intervals.push_back({b[0], b[1]});
  std::vector<Expression> exclusions;
  if (j.contains("exclusions")) {
    const json& ex = j.at("exclusions");
    if (!ex.is_array()) throw ModelFormatError("domain.exclusions: expected an array");
    for (std::size_t i = 0; i < ex.size(); ++i)
      exclusions.push_back(entry(ex[i], n, "domain.exclusions[" + std::to_string(i) + "]"));
  }
  const double margin = j.value("margin", 0.0);
  return Domain(std::move(intervals), std::move(exclusions), margin);
}

json expressions(const ExprVector& v, std::size_t n) {
  json out = json::array();
  for (const Expression& e : v) out.push_back(to_string(e, n));
  return out;
}

json expressions(const ExprMatrix& M, std::size_t n) {
  json out = json::array();
  for (std::size_t r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < M.cols(); ++c) row.push_back(to_string(M(r, c), n));
    out.push_back(row);
  }
  return out;
}

json zero_test_json(const ZeroTest& t) {
  return {{"zero", t.zero}, {"worst", t.worst}, {"worst_relative", t.worst_relative},
          {"defined_points", t.defined_points}};
}

}  // namespace

FiniteTransformation transform_from_json(const json& t, std::size_t n, std::size_t m, const Domain& domain,
                                         const std::string& where) {
  if (!t.is_object()) throw ModelFormatError(where + ": expected an object");
  ExprVector phi = t.contains("phi") ? vector_field(t.at("phi"), n, n, where + ".phi") : coordinates(n);
  ExprVector inv =
      t.contains("phi_inverse") ? vector_field(t.at("phi_inverse"), n, n, where + ".phi_inverse") : coordinates(n);
  ExprMatrix B = t.contains("B") ? matrix_field(t.at("B"), m, m, n, where + ".B") : ExprMatrix::identity(m);
  Expression eta = t.contains("eta") ? entry(t.at("eta"), n, where + ".eta") : Expression::constant(1);
  return FiniteTransformation(std::move(phi), std::move(inv), std::move(B), std::move(eta), domain);
}

ModelFile model_from_json(const json& doc) {
  if (!doc.is_object()) throw ModelFormatError("model file must be a JSON object");
  ModelFile model;
  model.name = doc.value("name", "");
  const auto n = required<std::size_t>(doc, "n");
  const auto m = required<std::size_t>(doc, "m");
  if (n == 0 || m == 0) throw DimensionError("n and m must be positive");
  if (!doc.contains("domain")) throw ModelFormatError("missing field 'domain'");
  Domain domain = domain_from_json(doc.at("domain"), n);
  if (!doc.contains("mu") || !doc.contains("sigma")) throw ModelFormatError("missing field 'mu' or 'sigma'");
  model.sde = Sde(vector_field(doc.at("mu"), n, n, "mu"), matrix_field(doc.at("sigma"), n, m, n, "sigma"), domain);
  if (doc.contains("x0")) {
    model.x0 = required<std::vector<double>>(doc, "x0");
    if (model.x0.size() != n) throw DimensionError("x0: expected " + std::to_string(n) + " coordinates");
  }
  if (doc.contains("transforms")) {
    for (const auto& [name, t] : doc.at("transforms").items()) {
      model.transforms.emplace(name, transform_from_json(t, n, m, domain, "transforms." + name));
    }
  }
  if (doc.contains("symmetries")) {
    for (const auto& [name, v] : doc.at("symmetries").items()) {
      const std::string where = "symmetries." + name;
      if (!v.contains("Y")) throw ModelFormatError(where + ": missing field 'Y'");
      ExprVector Y = vector_field(v.at("Y"), n, n, where + ".Y");
      ExprMatrix C = v.contains("C") ? matrix_field(v.at("C"), m, m, n, where + ".C") : ExprMatrix(m, m);
      Expression tau = v.contains("tau") ? entry(v.at("tau"), n, where + ".tau") : Expression();
      model.symmetries.emplace(name, InfinitesimalTransformation(std::move(Y), std::move(C), std::move(tau)));
    }
  }
  if (doc.contains("pipeline")) {
    const json& p = doc.at("pipeline");
    Pipeline plan;
    plan.symmetries = required<std::vector<std::string>>(p, "symmetries");
    plan.transform = p.value("transform", "");
    for (const std::string& name : plan.symmetries)
      if (!model.symmetries.count(name)) throw ModelFormatError("pipeline: unknown symmetry '" + name + "'");
    if (!plan.transform.empty() && !model.transforms.count(plan.transform))
      throw ModelFormatError("pipeline: unknown transform '" + plan.transform + "'");
    model.pipeline = std::move(plan);
  }
  return model;
}

ModelFile load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ModelFormatError("cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelFormatError(file.string() + ": " + e.what());
  }
  ModelFile model = model_from_json(doc);
  if (model.name.empty()) model.name = file.stem().string();
  return model;
}

json to_json(const Domain& domain) {
  json box = json::array();
  for (const Interval& b : domain.box()) box.push_back({b.low, b.high});
  json out{{"box", box}, {"margin", domain.margin()}};
  if (!domain.exclusions().empty()) out["exclusions"] = expressions(domain.exclusions(), domain.dimension());
  return out;
}

json to_json(const Sde& sde) {
  return {{"n", sde.n},
          {"m", sde.m},
          {"domain", to_json(sde.domain)},
          {"mu", expressions(sde.mu, sde.n)},
          {"sigma", expressions(sde.sigma, sde.n)}};
}

json to_json(const FiniteTransformation& T) {
  return {{"phi", expressions(T.phi, T.n)},
          {"phi_inverse", expressions(T.phi_inverse, T.n)},
          {"B", expressions(T.B, T.n)},
          {"eta", to_string(T.eta, T.n)}};
}

json to_json(const InfinitesimalTransformation& V) {
  return {{"Y", expressions(V.Y, V.n)}, {"C", expressions(V.C, V.n)}, {"tau", to_string(V.tau, V.n)}};
}

json to_json(const ModelFile& model) {
  json out = to_json(model.sde);
  if (!model.name.empty()) out["name"] = model.name;
  if (!model.x0.empty()) out["x0"] = model.x0;
  if (!model.transforms.empty()) {
    json t = json::object();
    for (const auto& [name, T] : model.transforms) t[name] = to_json(T);
    out["transforms"] = t;
  }
  if (!model.symmetries.empty()) {
    json s = json::object();
    for (const auto& [name, V] : model.symmetries) s[name] = to_json(V);
    out["symmetries"] = s;
  }
  if (model.pipeline) {
    out["pipeline"] = {{"symmetries", model.pipeline->symmetries}};
    if (!model.pipeline->transform.empty()) out["pipeline"]["transform"] = model.pipeline->transform;
  }
  return out;
}

json to_json(const ValidationReport& r) {
  json entries = json::array();
  for (const ValidationEntry& e : r.entries)
    entries.push_back({{"name", e.name}, {"passed", e.passed}, {"worst", e.worst}, {"detail", e.detail}});
  return {{"subject", r.subject}, {"passed", r.passed()}, {"entries", entries}};
}

json to_json(const ResidualReport& r, std::size_t n) {
  json drift = json::array(), diffusion = json::array();
  for (std::size_t i = 0; i < r.drift.size(); ++i)
    drift.push_back({{"expression", to_string(r.drift[i], n)}, {"test", zero_test_json(r.drift_tests[i])}});
  for (std::size_t i = 0; i < r.diffusion.rows(); ++i) {
    json row = json::array();
    for (std::size_t a = 0; a < r.diffusion.cols(); ++a)
      row.push_back({{"expression", to_string(r.diffusion(i, a), n)},
                     {"test", zero_test_json(r.diffusion_tests[i * r.diffusion.cols() + a])}});
    diffusion.push_back(row);
  }
  return {{"passed", r.passed()},
          {"drift_zero", r.drift_zero()},
          {"diffusion_zero", r.diffusion_zero()},
          {"worst_drift", r.worst_drift()},
          {"worst_diffusion", r.worst_diffusion()},
          {"drift", drift},
          {"diffusion", diffusion}};
}

json to_json(const StructureConstants& s) {
  json f = json::array();
  for (std::size_t i = 0; i < s.k; ++i)
    for (std::size_t j = 0; j < s.k; ++j) {
      json row = json::array();
      for (std::size_t l = 0; l < s.k; ++l) row.push_back(s.at(i, j, l));
      f.push_back({{"i", i + 1}, {"j", j + 1}, {"f", row}});
    }
  std::vector<bool> brackets = s.bracket_is_symmetry;
  return {{"closed", s.closed()}, {"k", s.k},           {"residual", s.residual},
          {"antisymmetry", s.antisymmetry}, {"constants", f}, {"bracket_is_symmetry", brackets}};
}

json to_json(const FiniteCheck& c) {
  return {{"passed", c.passed},
          {"worst_drift", c.worst_drift},
          {"worst_diffusion", c.worst_diffusion},
          {"worst_relative", c.worst_relative},
          {"points", c.points}};
}

json to_json(const ReductionCheck& c) {
  std::vector<bool> rotation = c.rotation_ok, scale = c.scale_ok;
  return {{"passed", c.passed}, {"rotation_ok", rotation}, {"scale_ok", scale}, {"worst", c.worst}};
}

json to_json(const ReductionGrid& g) {
  return {{"points", g.size()},
          {"k", g.k},
          {"verify_residual", g.verify_residual},
          {"pushforward_residual", g.pushforward_residual},
          {"passed", g.verify_residual <= kReductionTolerance && g.pushforward_residual <= kReductionTolerance}};
}

json to_json(const StatsReport& r) {
  json stats = json::array();
  for (const Statistic& s : r.statistics)
    stats.push_back({{"name", s.name},
                     {"observed", s.observed},
                     {"expected", s.expected},
                     {"standard_error", s.standard_error},
                     {"p_value", s.p_value},
                     {"passed", s.passed}});
  return {{"subject", r.subject},
          {"passed", r.passed()},
          {"samples_used", r.samples_used},
          {"samples_total", r.samples_total},
          {"alive_fraction", r.alive_fraction()},
          {"statistics", stats}};
}

}  // namespace stochsym
