#include "prosched/catalog.hpp"

#include <algorithm>
#include <sstream>

#include "text_util.hpp"

namespace prosched {

using nlohmann::json;

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::kMcpTool: return "mcp_tool";
    case Backend::kApiDefinition: return "api_definition";
    case Backend::kCustomAgent: return "custom_agent";
  }
  return "mcp_tool";
}

Backend parse_backend(std::string_view text) {
  const std::string t = detail::ascii_lower(detail::trim(text));
  if (t == "mcp_tool") return Backend::kMcpTool;
  if (t == "api_definition") return Backend::kApiDefinition;
  if (t == "custom_agent") return Backend::kCustomAgent;
  throw std::invalid_argument("unknown backend: " + std::string(text));
}

const ActionSpec* ActionCatalog::find(const std::string& action) const {
  auto it = std::find_if(actions.begin(), actions.end(),
                         [&](const ActionSpec& s) { return s.name == action; });
  return it == actions.end() ? nullptr : &*it;
}

std::set<std::string> ActionCatalog::action_names() const {
  std::set<std::string> out;
  for (const ActionSpec& s : actions) out.insert(s.name);
  return out;
}

std::map<std::string, ParamKind> estimate_parameter_properties(
    const std::vector<std::set<std::string>>& samples) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  std::map<std::string, std::size_t> seen;
  for (const auto& s : samples) {
    for (const auto& name : s) ++seen[name];
  }
  std::map<std::string, ParamKind> out;
  for (const auto& [name, n] : seen) {
    out[name] = n == samples.size() ? ParamKind::kRequired : ParamKind::kOptional;
  }
  return out;
}

ActionCatalog render_catalog(const json& ontology, const json& type_spec,
                             const json& properties) {
  ActionCatalog c;
  const json meta = ontology.value("catalog_metadata", json::object());
  c.name = meta.value("name", "");
  c.version = meta.value("version", "");
  c.domain = meta.value("domain", "");

  const json& specs = type_spec.at("actions");
  std::set<std::string> names;
  for (const json& entry : ontology.at("actions")) {
    ActionSpec spec;
    spec.name = entry.at("name").get<std::string>();
    spec.backend = parse_backend(entry.value("backend", "mcp_tool"));
    if (!names.insert(spec.name).second) {
      throw CatalogError("duplicate action name: " + spec.name);
    }
    if (!specs.contains(spec.name)) {
      throw CatalogError("missing type-spec entry for action " + spec.name);
    }
    const json& ts = specs.at(spec.name);
    spec.description = ts.value("description", "");
    const json params = ts.value("parameters", json::object());
    const json props = properties.contains(spec.name) ? properties.at(spec.name) : json::object();
    for (const auto& [pname, pdoc] : params.items()) {
      if (!props.contains(pname)) {
        throw CatalogError("missing property entry for " + spec.name + "." + pname);
      }
      ParamDoc doc{pdoc.value("type", "string"), pdoc.value("description", "")};
      spec.param_docs[pname] = doc;
      if (parse_param_kind(props.at(pname).get<std::string>()) == ParamKind::kRequired) {
        spec.required_params.push_back(pname);
      } else {
        spec.optional_params.push_back(pname);
      }
    }
    c.actions.push_back(std::move(spec));
  }
  std::sort(c.actions.begin(), c.actions.end(),
            [](const ActionSpec& a, const ActionSpec& b) { return a.name < b.name; });
  if (ontology.contains("workflows")) {
    for (const auto& [wname, seq] : ontology.at("workflows").items()) {
      c.workflows[wname] = seq.get<std::vector<std::string>>();
    }
  }
  return c;
}

std::vector<std::string> validate_catalog(const ActionCatalog& c) {
  std::vector<std::string> out;
  if (c.version.empty()) out.push_back("catalog version is empty");
  std::set<std::string> names;
  for (const ActionSpec& s : c.actions) {
    if (s.name.empty()) out.push_back("action with empty name");
    if (!names.insert(s.name).second) out.push_back("duplicate action name: " + s.name);
    std::set<std::string> req;
    for (const auto& p : s.required_params) {
      if (!req.insert(p).second) out.push_back(s.name + ": duplicate required parameter " + p);
    }
    std::set<std::string> opt;
    for (const auto& p : s.optional_params) {
      if (!opt.insert(p).second) out.push_back(s.name + ": duplicate optional parameter " + p);
      if (req.count(p)) out.push_back(s.name + ": parameter " + p + " is both required and optional");
    }
  }
  for (const auto& [wname, seq] : c.workflows) {
    for (const auto& a : seq) {
      if (!names.count(a)) out.push_back("workflow " + wname + " references unknown action " + a);
    }
  }
  return out;
}

std::vector<std::string> validate_instance(const ActionInstance& a, const ActionCatalog& c) {
  std::vector<std::string> out;
  const ActionSpec* spec = c.find(a.spec_name);
  if (!spec) {
    out.push_back("unknown action: " + a.spec_name);
    return out;
  }
  std::set<std::string> declared(spec->required_params.begin(), spec->required_params.end());
  declared.insert(spec->optional_params.begin(), spec->optional_params.end());
  auto check = [&](const std::vector<ParameterSpec>& ps) {
    for (const ParameterSpec& p : ps) {
      if (!declared.count(p.name)) out.push_back(a.spec_name + ": undeclared parameter " + p.name);
      if (!p.provided && p.value) out.push_back(a.spec_name + ": " + p.name + " has a value but provided=false");
    }
  };
  check(a.inputs_required);
  check(a.inputs_optional);
  return out;
}

namespace {

const char* group_key(Backend b) {
  switch (b) {
    case Backend::kMcpTool: return "mcp_tools";
    case Backend::kApiDefinition: return "api_definitions";
    case Backend::kCustomAgent: return "custom_agents";
  }
  return "mcp_tools";
}

}  // namespace

json catalog_to_json(const ActionCatalog& c) {
  json j;
  j["catalog_metadata"] = {{"name", c.name}, {"version", c.version}, {"domain", c.domain}};
  j["mcp_tools"] = json::array();
  j["api_definitions"] = json::array();
  j["custom_agents"] = json::array();
  std::vector<const ActionSpec*> sorted;
  for (const ActionSpec& s : c.actions) sorted.push_back(&s);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ActionSpec* a, const ActionSpec* b) { return a->name < b->name; });
  for (const ActionSpec* s : sorted) {
    json params = json::object();
    for (const auto& [p, doc] : s->param_docs) {
      params[p] = {{"type", doc.type}, {"description", doc.description}};
    }
    j[group_key(s->backend)].push_back({{"name", s->name},
                                        {"description", s->description},
                                        {"required", s->required_params},
                                        {"optional", s->optional_params},
                                        {"parameters", params}});
  }
  j["workflows"] = json::object();
  for (const auto& [w, seq] : c.workflows) j["workflows"][w] = seq;
  return j;
}

ActionCatalog catalog_from_json(const json& j) {
  ActionCatalog c;
  const json meta = j.value("catalog_metadata", json::object());
  c.name = meta.value("name", "");
  c.version = meta.value("version", "");
  c.domain = meta.value("domain", "");
  for (Backend b : {Backend::kMcpTool, Backend::kApiDefinition, Backend::kCustomAgent}) {
    if (!j.contains(group_key(b))) continue;
    for (const json& e : j.at(group_key(b))) {
      ActionSpec s;
      s.name = e.at("name").get<std::string>();
      s.description = e.value("description", "");
      s.backend = b;
      s.required_params = e.value("required", std::vector<std::string>{});
      s.optional_params = e.value("optional", std::vector<std::string>{});
      const json params = e.value("parameters", json::object());
      for (const auto& [p, doc] : params.items()) {
        s.param_docs[p] = ParamDoc{doc.value("type", "string"), doc.value("description", "")};
      }
      c.actions.push_back(std::move(s));
    }
  }
  std::stable_sort(c.actions.begin(), c.actions.end(),
                   [](const ActionSpec& a, const ActionSpec& b) { return a.name < b.name; });
  if (j.contains("workflows")) {
    for (const auto& [w, seq] : j.at("workflows").items()) {
      c.workflows[w] = seq.get<std::vector<std::string>>();
    }
  }
  return c;
}

std::string serialize_catalog(const ActionCatalog& c) { return catalog_to_json(c).dump(2) + "\n"; }

std::string render_catalog_text(const ActionCatalog& c) {
  std::ostringstream os;
  os << "Catalog: " << c.name << " (version " << c.version << ", domain " << c.domain << ")\n";
  auto param_line = [&](const ActionSpec& s, const std::string& p) {
    auto it = s.param_docs.find(p);
    os << "    - " << p;
    if (it != s.param_docs.end()) {
      os << " (" << it->second.type << ")";
      if (!it->second.description.empty()) os << ": " << it->second.description;
    }
    os << "\n";
  };
  for (const ActionSpec& s : c.actions) {
    os << "- " << s.name << " [" << to_string(s.backend) << "]: " << s.description << "\n";
    if (!s.required_params.empty()) {
      os << "  required:\n";
      for (const auto& p : s.required_params) param_line(s, p);
    }
    if (!s.optional_params.empty()) {
      os << "  optional:\n";
      for (const auto& p : s.optional_params) param_line(s, p);
    }
  }
  return os.str();
}

}  // namespace prosched
