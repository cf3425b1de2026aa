#include <doctest.h>

#include <map>

#include "prosched/config.hpp"
#include "testkit.hpp"

using namespace prosched;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

ConfigErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const RunConfigError& e) {
    return e.kind;
  }
  FAIL("expected a configuration error");
  return ConfigErrorKind::kParse;
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c = load_config({}, {}, env_of({}));
  CHECK(c.get_int("llm.max_tokens") == 9216);
  CHECK(c.get_double("llm.upper_limit_weight_for_scheduled_ruler") == 0.3);
  CHECK(c.get_int("llm.judger.max_retries") == 3);
  CHECK(c.get_int("training.max_negative_advantage_importance_sampling_weight") == 10);
  CHECK(c.get_double("cluster.gpu_memory_per_server") == 0.4);
  CHECK(c.get_bool("run.with_future"));
  CHECK(c.source("llm.max_tokens") == "default");
  CHECK_THROWS(c.get_string("llm.nope"));
}

TEST_CASE("files layer in order and flags win") {
  testkit::TempDir dir;
  write_file(dir.file("a.yaml"), "llm:\n  upper_limit_weight_for_scheduled_ruler: 0.3\n  max_tokens: 100\n");
  write_file(dir.file("b.yaml"), "llm:\n  max_tokens: 200\n");
  RunConfig c = load_config({dir.file("a.yaml"), dir.file("b.yaml")}, {}, env_of({}));
  CHECK(c.get_int("llm.max_tokens") == 200);
  CHECK(c.source("llm.max_tokens") == "file:" + dir.file("b.yaml"));
  CHECK(c.source("llm.upper_limit_weight_for_scheduled_ruler") == "file:" + dir.file("a.yaml"));

  c = load_config({dir.file("a.yaml")}, {{"llm.upper_limit_weight_for_scheduled_ruler", "0.5"}}, env_of({}));
  CHECK(c.get_double("llm.upper_limit_weight_for_scheduled_ruler") == 0.5);
  CHECK(c.source("llm.upper_limit_weight_for_scheduled_ruler") == "flag:llm.upper_limit_weight_for_scheduled_ruler");
  CHECK(c.with_provenance()["llm.upper_limit_weight_for_scheduled_ruler"]["source"] ==
        "flag:llm.upper_limit_weight_for_scheduled_ruler");
}

TEST_CASE("host macros expand from the environment") {
  const auto c = config_from_yaml_text("llm:\n  judger:\n    base_url: http://${HOST_IP}:8000/v1\n", "inline",
                                       env_of({{"HOST_IP", "10.0.0.7"}}));
  CHECK(c.get_string("llm.judger.base_url") == "http://10.0.0.7:8000/v1");
  CHECK(kind_of([] {
          config_from_yaml_text("llm:\n  judger:\n    base_url: http://${HOST_IP}/\n", "inline", env_of({}));
        }) == ConfigErrorKind::kUnresolvedMacro);
  const auto plain = config_from_yaml_text("llm:\n  model: ${NOT_A_HOST}\n", "inline", env_of({}));
  CHECK(plain.get_string("llm.model") == "${NOT_A_HOST}");

  CHECK(resolve_bind_address(env_of({{"VLLM_HOST_IP", "1.1.1.1"}, {"HOST_IP", "2.2.2.2"}})) == "1.1.1.1");
  CHECK(resolve_bind_address(env_of({{"HOST_IP", "2.2.2.2"}})) == "2.2.2.2");
  CHECK(resolve_bind_address(env_of({})) == "0.0.0.0");
}

TEST_CASE("validation errors") {
  CHECK(kind_of([] { config_from_yaml_text("llm:\n  max_tokns: 5\n", "x", env_of({})); }) ==
        ConfigErrorKind::kUnknownKey);
  try {
    config_from_yaml_text("training:\n  epsilon_hgh: 0.3\n", "x", env_of({}));
  } catch (const RunConfigError& e) {
    CHECK(std::string(e.what()).find("training.epsilon_hgh") != std::string::npos);
  }
  CHECK(kind_of([] { config_from_yaml_text("llm:\n  max_tokens: lots\n", "x", env_of({})); }) ==
        ConfigErrorKind::kTypeMismatch);
  CHECK(kind_of([] { config_from_yaml_text("run:\n  with_future: maybe\n", "x", env_of({})); }) ==
        ConfigErrorKind::kTypeMismatch);
  CHECK(kind_of([] { config_from_yaml_text("llm: [1, 2\n", "x", env_of({})); }) == ConfigErrorKind::kParse);
  CHECK(kind_of([] { config_from_yaml_text("run:\n  catalog_path: /definitely/missing.json\n", "x", env_of({})); }) ==
        ConfigErrorKind::kMissingFile);
  CHECK(kind_of([] { load_config({"/definitely/missing.yaml"}, {}, env_of({})); }) == ConfigErrorKind::kMissingFile);
  CHECK(kind_of([] { load_config({}, {{"run.seed", "x"}}, env_of({})); }) == ConfigErrorKind::kTypeMismatch);
  CHECK(kind_of([] { load_config({}, {{"run.sede", "1"}}, env_of({})); }) == ConfigErrorKind::kUnknownKey);
}

TEST_CASE("lists and digests") {
  const auto c = config_from_yaml_text("llm:\n  judger:\n    custom_ruler_placeholder: [a, b]\n", "x", env_of({}));
  CHECK(c.get_list("llm.judger.custom_ruler_placeholder") == std::vector<std::string>{"a", "b"});

  const auto base = load_config({}, {}, env_of({}));
  CHECK(base.digest().size() == 64);
  CHECK(base.digest() == load_config({}, {}, env_of({})).digest());
  CHECK(base.digest() != load_config({}, {{"run.seed", "1"}}, env_of({})).digest());
  // Provenance does not enter the digest.
  CHECK(base.digest() == load_config({}, {{"run.seed", "0"}}, env_of({})).digest());
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
