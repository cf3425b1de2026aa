#include "prosched/annotator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <set>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "prosched/action_state.hpp"

namespace prosched {

using nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>>& known_config_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"llm", {"model", "temperature", "max_tokens"}},
      {"tool_catalog", {"use_common_tools", "custom_tools", "catalog_path"}},
      {"annotation",
       {"batch_size", "validate_output", "retry_on_failure", "max_retries", "with_future",
        "max_workers", "start_index", "max_dialogues"}},
      {"output", {"output_suffix", "pretty_print", "save_individual_turns"}},
      {"prompts", {"system_prompt", "task_prompt"}},
      {"logging", {"level", "log_file", "log_to_console"}},
  };
  return keys;
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key " + key + " has the wrong type");
  }
}

}  // namespace

AnnotatorConfig parse_annotator_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("cannot parse annotator config: ") + e.what());
  }
  AnnotatorConfig cfg;
  if (!root || root.IsNull()) return cfg;
  if (!root.IsMap()) throw ConfigError("annotator config must be a mapping");
  const auto& known = known_config_keys();
  for (const auto& section : root) {
    const std::string sname = section.first.as<std::string>();
    auto ks = known.find(sname);
    if (ks == known.end()) throw ConfigError("unknown config key: " + sname);
    if (section.second.IsNull()) continue;
    if (!section.second.IsMap()) throw ConfigError("config section " + sname + " must be a mapping");
    for (const auto& kv : section.second) {
      const std::string k = kv.first.as<std::string>();
      const std::string full = sname + "." + k;
      if (!ks->second.count(k)) throw ConfigError("unknown config key: " + full);
      const YAML::Node& v = kv.second;
      if (full == "llm.model") cfg.model_id = scalar<std::string>(v, full);
      else if (full == "llm.temperature") cfg.temperature = scalar<double>(v, full);
      else if (full == "llm.max_tokens") cfg.max_tokens = scalar<int>(v, full);
      else if (full == "tool_catalog.catalog_path") cfg.catalog_path = scalar<std::string>(v, full);
      else if (full == "annotation.batch_size") cfg.batch_size = scalar<int>(v, full);
      else if (full == "annotation.max_retries") cfg.max_retries = scalar<int>(v, full);
      else if (full == "annotation.with_future") cfg.with_future = scalar<bool>(v, full);
      else if (full == "annotation.max_workers") cfg.max_workers = scalar<int>(v, full);
      else if (full == "annotation.start_index") cfg.start_index = scalar<int>(v, full);
      else if (full == "annotation.max_dialogues") {
        if (!v.IsNull()) cfg.max_dialogues = scalar<int>(v, full);
      } else if (full == "annotation.retry_on_failure") {
        if (!scalar<bool>(v, full)) cfg.max_retries = 0;
      } else if (full == "output.output_suffix") cfg.output_suffix = scalar<std::string>(v, full);
      else if (full == "prompts.system_prompt") cfg.system_prompt = scalar<std::string>(v, full);
      else if (full == "prompts.task_prompt") cfg.task_prompt = scalar<std::string>(v, full);
      else if (full == "logging.log_file") cfg.log_file = scalar<std::string>(v, full);
      // Remaining known keys are accepted and have no effect here.
    }
  }
  if (cfg.max_workers < 1) throw ConfigError("annotation.max_workers must be at least 1");
  if (cfg.batch_size < 1) throw ConfigError("annotation.batch_size must be at least 1");
  if (cfg.max_retries < 0) throw ConfigError("annotation.max_retries must be non-negative");
  return cfg;
}

AnnotatorConfig load_annotator_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_annotator_config(text);
}

const std::string& default_system_prompt() {
  static const std::string s =
      "You annotate multi-party dialogues with proactive automation opportunities.\n"
      "For the requested turn, report each relevant action with its required and optional\n"
      "inputs, the readiness maturity, your trigger confidence and the current trigger status.\n"
      "Answer with a single JSON object that follows the given schema.\n";
  return s;
}

const std::string& default_task_prompt() {
  static const std::string s = R"(## TASK
Annotate turn {turn_number} of the dialogue below.

## DIALOGUE CONTEXT
{dialogue_context}

## CURRENT TURN
Turn {turn_number}: {current_speaker} says: "{current_text}"

## ACTION CATALOG
{tool_catalog}
## OUTPUT SCHEMA
{{
  "dialogue_turn": {turn_number},
  "speaker": "<speaker>",
  "proactive_annotations": [{{
    "action_opportunity": {{
      "name": "ActionName",
      "description": "What this action does",
      "inputs": {{
        "required": [{{"input_name": "Name", "provided": true, "value": "known value"}}],
        "optional": [{{"input_name": "Name", "provided": false, "value": null}}],
        "readiness_maturity": "low/medium/high",
        "trigger_confidence": "low/medium/high",
        "action_trigger_status": "pending/ready_to_trigger/triggered/repeatable/dismissed"
      }}
    }}
  }}]
}}

## RULES
- List only opportunities relevant to this turn.
- Use ready_to_trigger only when every required input is known.
- Return an empty "proactive_annotations" array when nothing applies.
- Respond with the JSON object only.
)";
  return s;
}

std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
      out.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
      out.push_back('}');
      ++i;
    } else if (c == '{') {
      const auto close = tmpl.find('}', i);
      if (close == std::string::npos) throw TemplateError("unterminated placeholder in template");
      const std::string name = tmpl.substr(i + 1, close - i - 1);
      auto it = vars.find(name);
      if (it == vars.end()) throw TemplateError("unresolved template placeholder {" + name + "}");
      out += it->second;
      i = close;
    } else if (c == '}') {
      throw TemplateError("unmatched '}' in template");
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string format_dialogue_context(const Dialogue& d, int t, bool with_future) {
  std::ostringstream os;
  for (const TurnAnnotation& ta : d.turns) {
    if (!with_future && ta.turn.index > t) break;
    os << "Turn " << ta.turn.index << ": " << ta.turn.speaker << " says: \"" << ta.turn.text << "\"\n";
  }
  return os.str();
}

AnnotationPrompt build_annotation_prompt(const Dialogue& d, int t, const ActionCatalog& catalog,
                                         bool with_future, const AnnotatorConfig& cfg) {
  auto it = std::find_if(d.turns.begin(), d.turns.end(),
                         [&](const TurnAnnotation& ta) { return ta.turn.index == t; });
  if (it == d.turns.end()) {
    throw std::out_of_range("turn " + std::to_string(t) + " outside dialogue " + d.id);
  }
  const Turn& cur = it->turn;
  const std::map<std::string, std::string> vars = {
      {"turn_number", std::to_string(cur.index)},
      {"dialogue_context", format_dialogue_context(d, t, with_future)},
      {"current_speaker", cur.speaker},
      {"current_text", cur.text},
      {"tool_catalog", render_catalog_text(catalog)},
  };
  AnnotationPrompt p;
  p.system = cfg.system_prompt.empty() ? default_system_prompt() : cfg.system_prompt;
  p.user = render_template(cfg.task_prompt.empty() ? default_task_prompt() : cfg.task_prompt, vars);
  return p;
}

namespace {

const json* field(const json& obj, std::initializer_list<const char*> names) {
  if (!obj.is_object()) return nullptr;
  for (const char* n : names) {
    if (obj.contains(n)) return &obj.at(n);
  }
  return nullptr;
}

// Looks a key up in inputs, then the opportunity, then the element itself.
const json* status_field(const json& elem, const json& opp, const json* inputs,
                         std::initializer_list<const char*> names) {
  if (inputs) {
    if (const json* v = field(*inputs, names)) return v;
  }
  if (const json* v = field(opp, names)) return v;
  return field(elem, names);
}

std::vector<ParameterSpec> parse_inputs(const json* arr, ParamKind kind) {
  std::vector<ParameterSpec> out;
  if (!arr || arr->is_null()) return out;
  if (!arr->is_array()) throw AnnotationParseError("inputs must be arrays");
  for (const json& e : *arr) {
    ParameterSpec p;
    try {
      p = e.get<ParameterSpec>();
    } catch (const json::exception& ex) {
      throw AnnotationParseError(std::string("bad input entry: ") + ex.what());
    }
    p.kind = kind;
    if (!p.provided) p.value.reset();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

ParsedTurn parse_annotation_response(const std::string& text, int expected_turn) {
  const auto first = text.find('{');
  const auto last = text.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first) {
    throw AnnotationParseError("no JSON object in response");
  }
  json doc;
  try {
    doc = json::parse(text.substr(first, last - first + 1));
  } catch (const json::parse_error& e) {
    throw AnnotationParseError(std::string("invalid JSON: ") + e.what());
  }
  if (const json* turn = field(doc, {"dialogue_turn"})) {
    if (!turn->is_number_integer() || turn->get<int>() != expected_turn) {
      throw AnnotationParseError("response annotates a different turn");
    }
  }
  const json* anns = field(doc, {"proactive_annotations"});
  if (!anns || !anns->is_array()) throw AnnotationParseError("missing proactive_annotations array");
  ParsedTurn out;
  for (const json& elem : *anns) {
    const json& opp = elem.contains("action_opportunity") ? elem.at("action_opportunity") : elem;
    const json* name = field(opp, {"name"});
    if (!name || !name->is_string() || name->get<std::string>().empty()) {
      throw AnnotationParseError("annotation without an action name");
    }
    ActionInstance a;
    a.spec_name = name->get<std::string>();
    if (const json* d = field(opp, {"description"}); d && d->is_string()) a.description = d->get<std::string>();
    const json* inputs = field(opp, {"inputs"});
    a.inputs_required = parse_inputs(inputs ? field(*inputs, {"required"}) : nullptr, ParamKind::kRequired);
    a.inputs_optional = parse_inputs(inputs ? field(*inputs, {"optional"}) : nullptr, ParamKind::kOptional);
    try {
      if (const json* v = status_field(elem, opp, inputs, {"readiness_maturity", "parameters_readiness_maturity"})) {
        a.readiness_maturity = parse_level(v->get<std::string>());
      }
      if (const json* v = status_field(elem, opp, inputs, {"trigger_confidence"})) {
        a.trigger_confidence = parse_level(v->get<std::string>());
      }
      const json* st = status_field(elem, opp, inputs, {"action_trigger_status", "status"});
      if (!st) throw AnnotationParseError("annotation for " + a.spec_name + " lacks a trigger status");
      a.status = parse_trigger_status(st->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw AnnotationParseError(e.what());
    } catch (const json::exception& e) {
      throw AnnotationParseError(e.what());
    }
    out.actions.push_back(std::move(a));
  }
  if (const json* q = field(doc, {"questions"}); q && q->is_array()) {
    for (const json& s : *q) {
      if (s.is_string()) out.questions.push_back(s.get<std::string>());
    }
  }
  return out;
}

DialogueAnnotation annotate_dialogue(const Dialogue& d, const ActionCatalog& catalog,
                                     const CompletionProvider& provider, const AnnotatorConfig& cfg) {
  DialogueAnnotation out;
  out.dialogue.id = d.id;
  out.dialogue.observed_triggers = d.observed_triggers;
  for (const TurnAnnotation& src : d.turns) {
    TurnAnnotation ta;
    ta.turn = src.turn;
    const AnnotationPrompt prompt = build_annotation_prompt(d, src.turn.index, catalog, cfg.with_future, cfg);
    const int attempts = 1 + std::max(0, cfg.max_retries);
    std::string last_error;
    bool done = false;
    for (int attempt = 1; attempt <= attempts && !done; ++attempt) {
      if (attempt > 1) ++out.retries;
      CompletionRequest req{prompt.system, prompt.user, cfg.model_id, cfg.temperature, cfg.max_tokens,
                            d.id, src.turn.index, attempt};
      try {
        ParsedTurn parsed = parse_annotation_response(provider(req), src.turn.index);
        ta.actions = std::move(parsed.actions);
        ta.questions = std::move(parsed.questions);
        done = true;
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    if (!done) {
      ta.failure = "failed after " + std::to_string(attempts) + " attempts: " + last_error;
      ++out.failed_turns;
    }
    for (const ActionInstance& a : ta.actions) {
      for (auto& v : validate_instance(a, catalog)) {
        out.violations.push_back("turn " + std::to_string(ta.turn.index) + ": " + v);
      }
    }
    out.dialogue.turns.push_back(std::move(ta));
  }
  out.ranges = compute_reference_ranges(out.dialogue);
  return out;
}

json annotation_record(const DialogueAnnotation& a) {
  json j = a.dialogue;
  j["reference_ranges"] = a.ranges;
  j["violations"] = a.violations;
  return j;
}

void ProgressLog::record(const std::string& line) {
  if (!out_) return;
  std::lock_guard lock(mu_);
  *out_ << line << '\n';
  out_->flush();
}

BatchReport run_batch(const std::vector<Dialogue>& dialogues, const ActionCatalog& catalog,
                      const CompletionProvider& provider, const AnnotatorConfig& cfg, LineWriter& sink,
                      ProgressLog* progress) {
  const int total = static_cast<int>(dialogues.size());
  if (cfg.start_index < 0 || cfg.start_index >= total) {
    throw std::invalid_argument("start_index " + std::to_string(cfg.start_index) + " outside [0, " +
                                std::to_string(total) + ")");
  }
  int end = total;
  if (cfg.max_dialogues) end = std::min(total, cfg.start_index + std::max(0, *cfg.max_dialogues));
  const int count = end - cfg.start_index;

  BatchReport rep;
  rep.start_index = cfg.start_index;
  rep.next_index = cfg.start_index;

  std::vector<std::optional<DialogueAnnotation>> slots(static_cast<std::size_t>(count));
  std::mutex mu;
  int next_write = 0;
  std::atomic<int> next_task{0};
  std::atomic<bool> abort{false};
  std::optional<std::string> write_error;

  auto flush_ready = [&] {
    // Caller holds mu.
    while (next_write < count && slots[static_cast<std::size_t>(next_write)]) {
      const DialogueAnnotation& a = *slots[static_cast<std::size_t>(next_write)];
      try {
        sink.write_line(annotation_record(a).dump());
      } catch (const std::exception& e) {
        write_error = e.what();
        abort = true;
        return;
      }
      rep.dialogue_ids.push_back(a.dialogue.id);
      rep.failed_turns += a.failed_turns;
      rep.retries += a.retries;
      rep.violations += static_cast<int>(a.violations.size());
      slots[static_cast<std::size_t>(next_write)].reset();
      ++next_write;
    }
  };

  auto worker = [&] {
    for (int i = next_task++; i < count && !abort; i = next_task++) {
      const Dialogue& d = dialogues[static_cast<std::size_t>(cfg.start_index + i)];
      const auto t0 = std::chrono::steady_clock::now();
      DialogueAnnotation a;
      try {
        a = annotate_dialogue(d, catalog, provider, cfg);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!write_error) write_error = "dialogue " + d.id + ": " + e.what();
        abort = true;
        return;
      }
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0).count();
      if (progress) {
        progress->record("index=" + std::to_string(cfg.start_index + i) + " dialogue=" + d.id +
                         " turns=" + std::to_string(a.dialogue.turns.size()) +
                         " failed_turns=" + std::to_string(a.failed_turns) +
                         " retries=" + std::to_string(a.retries) + " ms=" + std::to_string(ms));
      }
      std::lock_guard lock(mu);
      slots[static_cast<std::size_t>(i)] = std::move(a);
      if (!write_error) flush_ready();
    }
  };

  const int workers = std::max(1, std::min(cfg.max_workers, std::max(count, 1)));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  rep.processed = next_write;
  rep.next_index = cfg.start_index + next_write;
  if (write_error) {
    throw BatchWriteError("write failed after " + std::to_string(next_write) + " records: " + *write_error,
                          next_write, rep.next_index);
  }
  try {
    sink.close();
  } catch (const std::exception& e) {
    throw BatchWriteError(std::string("close failed: ") + e.what(), next_write, rep.next_index);
  }
  return rep;
}

std::string annotated_output_path(const std::string& input_path, const std::string& suffix) {
  std::filesystem::path p(input_path);
  std::string stem = p.filename().string();
  for (const char* ext : {".gz", ".jsonl", ".json"}) {
    const std::string e(ext);
    if (stem.size() > e.size() && stem.compare(stem.size() - e.size(), e.size(), e) == 0) {
      stem.resize(stem.size() - e.size());
    }
  }
  return (p.parent_path() / (stem + suffix + ".jsonl.gz")).string();
}

}  // namespace prosched
