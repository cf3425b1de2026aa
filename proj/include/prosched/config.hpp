#pragma once

// Merged run configuration: built-in defaults, then YAML files in order,
// then command-line overrides. Keys are flattened to dotted paths
// ("llm.judger.model") and every value remembers where it came from.

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace prosched {

enum class ConfigErrorKind { kUnknownKey, kTypeMismatch, kUnresolvedMacro, kMissingFile, kParse };

struct RunConfigError : std::runtime_error {
  RunConfigError(ConfigErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  ConfigErrorKind kind;
};

enum class ValueType { kString, kInt, kDouble, kBool, kStringList, kPath, kHost };

struct KeySchema {
  std::string key;
  ValueType type;
  nlohmann::json default_value;
};

const std::vector<KeySchema>& run_config_schema();

struct ConfigEntry {
  nlohmann::json value;
  std::string source;  // "default", "file:<path>" or "flag:<name>"
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

class RunConfig {
 public:
  const std::map<std::string, ConfigEntry>& entries() const { return entries_; }

  std::string get_string(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  const std::string& source(const std::string& key) const;

  /// Sorted flat {key: value} object; the digest is taken over its compact dump.
  nlohmann::json canonical() const;
  nlohmann::json with_provenance() const;
  std::string digest() const;  // lowercase hex SHA-256

 private:
  friend RunConfig load_config(const std::vector<std::string>&,
                               const std::vector<std::pair<std::string, std::string>>&, const EnvLookup&);
  friend RunConfig config_from_yaml_text(const std::string&, const std::string&, const EnvLookup&);
  const ConfigEntry& at(const std::string& key) const;
  std::map<std::string, ConfigEntry> entries_;
};

/// Overrides are (dotted key, raw text) pairs and always win. `${VAR}`
/// macros are expanded only in host/address keys; an unset variable is an
/// error. Non-empty path keys must name an existing file.
RunConfig load_config(const std::vector<std::string>& paths,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {},
                      const EnvLookup& env = process_env);

/// Single-document variant for tests; `label` stands in for the file name.
RunConfig config_from_yaml_text(const std::string& yaml_text, const std::string& label = "inline",
                                const EnvLookup& env = process_env);

/// Bind address for inference servers: VLLM_HOST_IP, then HOST_IP, then 0.0.0.0.
std::string resolve_bind_address(const EnvLookup& env = process_env);

std::string sha256_hex(const std::string& data);

}  // namespace prosched
