#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stochsym/flow.hpp"
#include "stochsym/model.hpp"
#include "stochsym/simulate.hpp"
#include "stochsym/symmetry.hpp"

namespace stochsym {

/// Stage plan of the end-to-end example run on a model file.
struct Pipeline {
  std::vector<std::string> symmetries;
  std::string transform;  // empty: no transformation stages
};

/// Contents of one model file: an SDE with named transformations and
/// symmetries sharing its dimensions and domain. Format in docs/model-format.md.
struct ModelFile {
  std::string name;
  Sde sde;
  std::vector<double> x0;  // empty when the file gives none
  std::map<std::string, FiniteTransformation> transforms;
  std::map<std::string, InfinitesimalTransformation> symmetries;
  std::optional<Pipeline> pipeline;
};

/// Throws ModelFormatError on malformed documents or entries, DimensionError
/// on shape mismatches.
ModelFile model_from_json(const nlohmann::json& doc);
ModelFile load_model(const std::filesystem::path& file);
/// One transformation object {phi, phi_inverse, B, eta}; omitted fields
/// default to the identity. where prefixes error messages.
FiniteTransformation transform_from_json(const nlohmann::json& t, std::size_t n, std::size_t m,
                                         const Domain& domain, const std::string& where = "transform");

nlohmann::json to_json(const Domain& domain);
nlohmann::json to_json(const Sde& sde);
nlohmann::json to_json(const FiniteTransformation& T);
nlohmann::json to_json(const InfinitesimalTransformation& V);
nlohmann::json to_json(const ModelFile& model);

nlohmann::json to_json(const ValidationReport& r);
nlohmann::json to_json(const ResidualReport& r, std::size_t n);
nlohmann::json to_json(const StructureConstants& s);
nlohmann::json to_json(const FiniteCheck& c);
nlohmann::json to_json(const ReductionCheck& c);
nlohmann::json to_json(const ReductionGrid& g);
nlohmann::json to_json(const StatsReport& r);

}  // namespace stochsym
