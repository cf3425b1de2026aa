#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosched/types.hpp"

namespace prosched {

enum class Backend { kMcpTool, kApiDefinition, kCustomAgent };
std::string_view to_string(Backend b);
Backend parse_backend(std::string_view text);

struct ParamDoc {
  std::string type = "string";
  std::string description;

  friend bool operator==(const ParamDoc&, const ParamDoc&) = default;
};

struct ActionSpec {
  std::string name;
  std::string description;
  std::vector<std::string> required_params;
  std::vector<std::string> optional_params;
  Backend backend = Backend::kMcpTool;
  std::map<std::string, ParamDoc> param_docs;

  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

struct ActionCatalog {
  std::string name;
  std::string version;
  std::string domain;
  // Kept as a list so duplicate names survive until validation reports them.
  std::vector<ActionSpec> actions;
  // Ordered action sequences from the ontology, used to seed transition counts.
  std::map<std::string, std::vector<std::string>> workflows;

  const ActionSpec* find(const std::string& action) const;
  std::set<std::string> action_names() const;

  friend bool operator==(const ActionCatalog&, const ActionCatalog&) = default;
};

/// A name is required iff it appears in every sample. Throws on empty input.
std::map<std::string, ParamKind> estimate_parameter_properties(
    const std::vector<std::set<std::string>>& samples);

/// Compiles ontology, type spec and parameter properties into a catalog.
/// Throws CatalogError on a missing type-spec entry, a missing property
/// entry or a duplicate action name.
ActionCatalog render_catalog(const nlohmann::json& ontology, const nlohmann::json& type_spec,
                             const nlohmann::json& properties);

std::vector<std::string> validate_catalog(const ActionCatalog& c);

/// Checks an instance against the catalog: unknown action, undeclared input
/// names, provided=false with a value. Violations only, never throws.
std::vector<std::string> validate_instance(const ActionInstance& a, const ActionCatalog& c);

struct CatalogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical, key-sorted form. dump(2) of this is byte-stable.
nlohmann::json catalog_to_json(const ActionCatalog& c);
ActionCatalog catalog_from_json(const nlohmann::json& j);
std::string serialize_catalog(const ActionCatalog& c);

/// Plain-text rendering embedded in annotation prompts.
std::string render_catalog_text(const ActionCatalog& c);

}  // namespace prosched
