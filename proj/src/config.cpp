#include "prosched/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "text_util.hpp"

namespace prosched {

using nlohmann::json;

const std::vector<KeySchema>& run_config_schema() {
  static const std::vector<KeySchema> schema = {
      {"logging.level", ValueType::kString, "info"},
      {"logging.log_file", ValueType::kString, ""},

      {"llm.model", ValueType::kString, "policy"},
      {"llm.max_tokens", ValueType::kInt, 9216},
      {"llm.rollout.sample_num_per_training_scenario", ValueType::kInt, 4},
      {"llm.rollout.sample_num_per_validation_scenario", ValueType::kInt, 2},
      {"llm.rollout.temperature", ValueType::kDouble, 1.0},
      {"llm.rollout.messages", ValueType::kString, "system.user.only"},
      {"llm.trajectory_reward_rule", ValueType::kString, "rac"},
      {"llm.upper_limit_weight_for_scheduled_ruler", ValueType::kDouble, 0.3},
      {"llm.hybrid_ruler_weight", ValueType::kDouble, 0.3},
      {"llm.judger.model", ValueType::kString, "judge"},
      {"llm.judger.api_key_name", ValueType::kString, ""},
      {"llm.judger.base_url", ValueType::kHost, ""},
      {"llm.judger.custom_ruler_placeholder", ValueType::kStringList, json::array()},
      {"llm.judger.max_concurrent_api_number", ValueType::kInt, 4},
      {"llm.judger.max_retries", ValueType::kInt, 3},

      {"ddp_training.enable_ddp", ValueType::kBool, false},
      {"ddp_training.world_size", ValueType::kInt, 1},
      {"ddp_training.ddp_backend", ValueType::kString, "nccl"},
      {"ddp_training.ddp_find_unused_parameters", ValueType::kBool, false},
      {"ddp_training.master_addr", ValueType::kHost, "127.0.0.1"},
      {"ddp_training.master_port", ValueType::kString, "29500"},
      {"ddp_training.ddp_timeout_minutes", ValueType::kInt, 30},
      {"ddp_training.batch_size_allow_adjusting", ValueType::kBool, false},
      {"ddp_training.replicate_dataset_across_ranks", ValueType::kBool, false},

      {"cluster.max_servers_per_model", ValueType::kInt, 8},
      {"cluster.gpu_count", ValueType::kInt, 4},
      {"cluster.gpu_memory_per_server", ValueType::kDouble, 0.4},
      {"cluster.port_range_start", ValueType::kInt, 8000},
      {"cluster.port_range_end", ValueType::kInt, 8099},
      {"cluster.concurrent_startup", ValueType::kBool, true},
      {"cluster.load_balancing_strategy", ValueType::kString, "round_robin"},
      {"cluster.enable_concurrent_rollouts", ValueType::kBool, true},
      {"cluster.rollout_batch_size", ValueType::kInt, 24},
      {"cluster.bind_host", ValueType::kHost, ""},
      {"cluster.scaling_policy.enable_auto_scaling", ValueType::kBool, true},
      {"cluster.scaling_policy.scale_up_before_rollout", ValueType::kBool, true},
      {"cluster.scaling_policy.scale_down_before_training", ValueType::kBool, true},
      {"cluster.scaling_policy.scaling_timeout", ValueType::kInt, 30},

      {"training.training_batch_size", ValueType::kInt, 4},
      {"training.logprob_calculation_chunk_size", ValueType::kInt, 1024},
      {"training.max_negative_advantage_importance_sampling_weight", ValueType::kDouble, 10.0},
      {"training.epsilon", ValueType::kDouble, 0.2},
      {"training.epsilon_high", ValueType::kDouble, 0.2},
      {"training.advantage_std", ValueType::kString, "population"},
      {"training.total_steps", ValueType::kInt, 1},

      {"run.seed", ValueType::kInt, 0},
      {"run.catalog_path", ValueType::kPath, ""},
      {"run.with_future", ValueType::kBool, true},
      {"run.start_index", ValueType::kInt, 0},
      {"run.max_dialogues", ValueType::kInt, -1},
      {"run.ftr_mode", ValueType::kString, "no_range"},

      {"alignment.sigma", ValueType::kInt, 2},
      {"alignment.dialogue_pass_threshold", ValueType::kDouble, 0.8},
      {"alignment.critical_action", ValueType::kString, ""},
  };
  return schema;
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

namespace {

const KeySchema* find_schema(const std::string& key) {
  for (const KeySchema& k : run_config_schema()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

bool is_section_prefix(const std::string& key) {
  for (const KeySchema& k : run_config_schema()) {
    if (k.key.size() > key.size() && k.key.compare(0, key.size(), key) == 0 && k.key[key.size()] == '.')
      return true;
  }
  return false;
}

std::string expand_macros(const std::string& key, const std::string& text, const EnvLookup& env) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 2, "${") == 0) {
      const std::size_t close = text.find('}', i + 2);
      if (close == std::string::npos) {
        throw RunConfigError(ConfigErrorKind::kUnresolvedMacro, key + ": unterminated macro");
      }
      const std::string var = text.substr(i + 2, close - i - 2);
      const auto value = env(var);
      if (!value) {
        throw RunConfigError(ConfigErrorKind::kUnresolvedMacro,
                             key + ": environment variable " + var + " is not set");
      }
      out += *value;
      i = close + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

[[noreturn]] void mismatch(const std::string& key, const std::string& expected, const std::string& got) {
  throw RunConfigError(ConfigErrorKind::kTypeMismatch, key + ": expected " + expected + ", got '" + got + "'");
}

json coerce_scalar(const KeySchema& s, const std::string& text) {
  const std::string t(detail::trim(text));
  switch (s.type) {
    case ValueType::kString:
    case ValueType::kPath:
    case ValueType::kHost:
      return text;
    case ValueType::kInt: {
      try {
        std::size_t pos = 0;
        const long v = std::stol(t, &pos);
        if (pos != t.size()) mismatch(s.key, "integer", text);
        return v;
      } catch (const std::logic_error&) {
        mismatch(s.key, "integer", text);
      }
    }
    case ValueType::kDouble: {
      try {
        std::size_t pos = 0;
        const double v = std::stod(t, &pos);
        if (pos != t.size()) mismatch(s.key, "number", text);
        return v;
      } catch (const std::logic_error&) {
        mismatch(s.key, "number", text);
      }
    }
    case ValueType::kBool: {
      const std::string l = detail::ascii_lower(t);
      if (l == "true" || l == "yes" || l == "1") return true;
      if (l == "false" || l == "no" || l == "0") return false;
      mismatch(s.key, "boolean", text);
    }
    case ValueType::kStringList: {
      // A scalar override is a comma-free single entry; empty clears the list.
      if (t.empty()) return json::array();
      return json::array({text});
    }
  }
  mismatch(s.key, "known type", text);
}

json coerce_node(const KeySchema& s, const YAML::Node& node) {
  if (s.type == ValueType::kStringList) {
    if (node.IsNull()) return json::array();
    if (!node.IsSequence()) mismatch(s.key, "list", node.IsScalar() ? node.Scalar() : "map");
    json arr = json::array();
    for (const YAML::Node& item : node) {
      if (!item.IsScalar()) mismatch(s.key, "list of strings", "nested value");
      arr.push_back(item.Scalar());
    }
    return arr;
  }
  if (node.IsNull()) return s.default_value;
  if (!node.IsScalar()) mismatch(s.key, "scalar", node.IsSequence() ? "list" : "map");
  return coerce_scalar(s, node.Scalar());
}

void flatten(const YAML::Node& node, const std::string& prefix, std::map<std::string, YAML::Node>& out) {
  for (const auto& kv : node) {
    const std::string key = prefix.empty() ? kv.first.Scalar() : prefix + "." + kv.first.Scalar();
    if (find_schema(key)) {
      out[key] = kv.second;
    } else if (kv.second.IsMap() && is_section_prefix(key)) {
      flatten(kv.second, key, out);
    } else {
      throw RunConfigError(ConfigErrorKind::kUnknownKey, "unknown configuration key: " + key);
    }
  }
}

std::map<std::string, ConfigEntry> defaults() {
  std::map<std::string, ConfigEntry> m;
  for (const KeySchema& k : run_config_schema()) m[k.key] = {k.default_value, "default"};
  return m;
}

void merge_yaml(std::map<std::string, ConfigEntry>& entries, const std::string& text, const std::string& label) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw RunConfigError(ConfigErrorKind::kParse, label + ": " + e.what());
  }
  if (root.IsNull()) return;
  if (!root.IsMap()) throw RunConfigError(ConfigErrorKind::kParse, label + ": top level must be a mapping");
  std::map<std::string, YAML::Node> flat;
  flatten(root, "", flat);
  for (const auto& [key, node] : flat) entries[key] = {coerce_node(*find_schema(key), node), "file:" + label};
}

void finalize(std::map<std::string, ConfigEntry>& entries, const EnvLookup& env) {
  for (auto& [key, e] : entries) {
    const KeySchema* s = find_schema(key);
    if (s->type == ValueType::kHost) {
      e.value = expand_macros(key, e.value.get<std::string>(), env);
    } else if (s->type == ValueType::kPath) {
      const std::string p = e.value.get<std::string>();
      if (!p.empty() && !std::filesystem::is_regular_file(p)) {
        throw RunConfigError(ConfigErrorKind::kMissingFile, key + ": file not found: " + p);
      }
    }
  }
}

}  // namespace

const ConfigEntry& RunConfig::at(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw RunConfigError(ConfigErrorKind::kUnknownKey, "unknown configuration key: " + key);
  return it->second;
}

std::string RunConfig::get_string(const std::string& key) const { return at(key).value.get<std::string>(); }
long RunConfig::get_int(const std::string& key) const { return at(key).value.get<long>(); }
double RunConfig::get_double(const std::string& key) const { return at(key).value.get<double>(); }
bool RunConfig::get_bool(const std::string& key) const { return at(key).value.get<bool>(); }
std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  return at(key).value.get<std::vector<std::string>>();
}
const std::string& RunConfig::source(const std::string& key) const { return at(key).source; }

json RunConfig::canonical() const {
  json j = json::object();
  for (const auto& [k, e] : entries_) j[k] = e.value;
  return j;
}

json RunConfig::with_provenance() const {
  json j = json::object();
  for (const auto& [k, e] : entries_) j[k] = {{"value", e.value}, {"source", e.source}};
  return j;
}

std::string RunConfig::digest() const { return sha256_hex(canonical().dump()); }

RunConfig load_config(const std::vector<std::string>& paths,
                      const std::vector<std::pair<std::string, std::string>>& overrides, const EnvLookup& env) {
  RunConfig c;
  c.entries_ = defaults();
  for (const std::string& p : paths) {
    std::FILE* f = std::fopen(p.c_str(), "rb");
    if (!f) throw RunConfigError(ConfigErrorKind::kMissingFile, "cannot open config file: " + p);
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    std::fclose(f);
    merge_yaml(c.entries_, text, p);
  }
  for (const auto& [key, raw] : overrides) {
    const KeySchema* s = find_schema(key);
    if (!s) throw RunConfigError(ConfigErrorKind::kUnknownKey, "unknown configuration key: " + key);
    c.entries_[key] = {coerce_scalar(*s, raw), "flag:" + key};
  }
  finalize(c.entries_, env);
  return c;
}

RunConfig config_from_yaml_text(const std::string& yaml_text, const std::string& label, const EnvLookup& env) {
  RunConfig c;
  c.entries_ = defaults();
  merge_yaml(c.entries_, yaml_text, label);
  finalize(c.entries_, env);
  return c;
}

std::string resolve_bind_address(const EnvLookup& env) {
  for (const char* var : {"VLLM_HOST_IP", "HOST_IP"}) {
    if (auto v = env(var); v && !v->empty()) return *v;
  }
  return "0.0.0.0";
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

}  // namespace prosched
