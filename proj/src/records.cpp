#include "prosched/records.hpp"

#include <fstream>
#include <sstream>

#include <zlib.h>

namespace prosched {

using nlohmann::json;

void to_json(json& j, const ParameterSpec& p) {
  j = json{{"input_name", p.name}, {"provided", p.provided}};
  j["value"] = p.value ? json(*p.value) : json(nullptr);
}

void from_json(const json& j, ParameterSpec& p) {
  p.name = j.contains("input_name") ? j.at("input_name").get<std::string>()
                                    : j.at("name").get<std::string>();
  p.provided = j.value("provided", false);
  p.value.reset();
  if (j.contains("value") && !j.at("value").is_null()) {
    const json& v = j.at("value");
    p.value = v.is_string() ? v.get<std::string>() : v.dump();
  }
}

void to_json(json& j, const ActionInstance& a) {
  json req = json::array();
  json opt = json::array();
  for (const auto& p : a.inputs_required) req.push_back(p);
  for (const auto& p : a.inputs_optional) opt.push_back(p);
  j = json{{"name", a.spec_name},
           {"description", a.description},
           {"inputs", {{"required", req}, {"optional", opt}}},
           {"readiness_maturity", std::string(to_string(a.readiness_maturity))},
           {"trigger_confidence", std::string(to_string(a.trigger_confidence))},
           {"action_trigger_status", std::string(to_string(a.status))}};
}

namespace {

std::vector<ParameterSpec> params_from(const json& arr, ParamKind kind) {
  std::vector<ParameterSpec> out;
  for (const json& e : arr) {
    ParameterSpec p = e.get<ParameterSpec>();
    p.kind = kind;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

void from_json(const json& j, ActionInstance& a) {
  a.spec_name = j.at("name").get<std::string>();
  a.description = j.value("description", "");
  const json inputs = j.value("inputs", json::object());
  a.inputs_required = params_from(inputs.value("required", json::array()), ParamKind::kRequired);
  a.inputs_optional = params_from(inputs.value("optional", json::array()), ParamKind::kOptional);
  a.readiness_maturity = parse_level(j.value("readiness_maturity", "low"));
  a.trigger_confidence = parse_level(j.value("trigger_confidence", "low"));
  a.status = parse_trigger_status(j.value("action_trigger_status", "pending"));
}

void to_json(json& j, const Turn& t) {
  j = json{{"dialogue_turn", t.index}, {"speaker", t.speaker}, {"text", t.text}};
}

void from_json(const json& j, Turn& t) {
  t.index = j.at("dialogue_turn").get<int>();
  t.speaker = j.value("speaker", "");
  t.text = j.value("text", "");
}

void to_json(json& j, const TurnAnnotation& t) {
  to_json(j, t.turn);
  json acts = json::array();
  for (const auto& a : t.actions) acts.push_back(a);
  j["proactive_annotations"] = acts;
  j["questions"] = t.questions;
  if (t.failure) j["failure"] = *t.failure;
}

void from_json(const json& j, TurnAnnotation& t) {
  from_json(j, t.turn);
  t.actions.clear();
  for (const json& a : j.value("proactive_annotations", json::array())) {
    t.actions.push_back(a.get<ActionInstance>());
  }
  t.questions = j.value("questions", std::vector<std::string>{});
  t.failure.reset();
  if (j.contains("failure") && j.at("failure").is_string()) t.failure = j.at("failure").get<std::string>();
}

void to_json(json& j, const TriggerRef& t) { j = json{{"turn", t.turn}, {"action", t.action}}; }

void from_json(const json& j, TriggerRef& t) {
  t.turn = j.at("turn").get<int>();
  t.action = j.at("action").get<std::string>();
}

void to_json(json& j, const Dialogue& d) {
  json turns = json::array();
  for (const auto& t : d.turns) turns.push_back(t);
  j = json{{"dialogue_id", d.id}, {"turns", turns}};
  if (d.observed_triggers) {
    json obs = json::array();
    for (const auto& t : *d.observed_triggers) obs.push_back(t);
    j["observed_triggers"] = obs;
  }
}

void from_json(const json& j, Dialogue& d) {
  d.id = j.at("dialogue_id").get<std::string>();
  d.turns.clear();
  for (const json& t : j.at("turns")) d.turns.push_back(t.get<TurnAnnotation>());
  d.observed_triggers.reset();
  if (j.contains("observed_triggers") && !j.at("observed_triggers").is_null()) {
    std::vector<TriggerRef> obs;
    for (const json& t : j.at("observed_triggers")) obs.push_back(t.get<TriggerRef>());
    d.observed_triggers = std::move(obs);
  }
}

void to_json(json& j, const ReferenceRange& r) {
  json per = json::object();
  for (const auto& [a, turns] : r.per_action) per[a] = turns;
  json occ = json::object();
  for (const auto& [a, list] : r.occurrences) {
    json arr = json::array();
    for (const auto& [t, s] : list) arr.push_back(json::array({t, std::string(to_string(s))}));
    occ[a] = arr;
  }
  j = json{{"per_action", per}, {"occurrences", occ}};
}

void from_json(const json& j, ReferenceRange& r) {
  r = ReferenceRange{};
  for (const auto& [a, turns] : j.at("per_action").items()) {
    r.per_action[a] = turns.get<std::set<int>>();
  }
  for (const auto& [a, list] : j.at("occurrences").items()) {
    auto& dst = r.occurrences[a];
    for (const json& e : list) {
      dst.emplace_back(e.at(0).get<int>(), parse_trigger_status(e.at(1).get<std::string>()));
    }
  }
}

void to_json(json& j, const TurnPrediction& p) {
  json acts = json::array();
  for (const auto& a : p.actions) acts.push_back(a);
  j = json{{"proactive_annotations", acts}, {"questions", p.questions}};
}

void from_json(const json& j, TurnPrediction& p) {
  p.actions.clear();
  for (const json& a : j.value("proactive_annotations", json::array())) {
    p.actions.push_back(a.get<ActionInstance>());
  }
  p.questions = j.value("questions", std::vector<std::string>{});
}

json eval_dialogue_to_json(const EvalDialogue& d) {
  json j = d.reference;
  for (std::size_t i = 0; i < d.predictions.size() && i < j["turns"].size(); ++i) {
    j["turns"][i]["predicted"] = d.predictions[i];
  }
  return j;
}

EvalDialogue eval_dialogue_from_json(const json& j) {
  EvalDialogue d;
  d.reference = j.get<Dialogue>();
  for (const json& t : j.at("turns")) {
    d.predictions.push_back(t.contains("predicted") ? t.at("predicted").get<TurnPrediction>()
                                                    : TurnPrediction{});
  }
  return d;
}

bool has_gz_suffix(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

std::string read_file(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open " + path);
  std::string out;
  char buf[1 << 15];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = 0;
  const bool failed = n < 0;
  const char* msg = failed ? gzerror(f, &err) : nullptr;
  gzclose(f);
  if (failed) throw IoError("read error on " + path + ": " + (msg ? msg : "?"));
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

namespace {

class PlainWriter : public LineWriter {
 public:
  PlainWriter(const std::string& path, bool append)
      : path_(path), out_(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc)) {
    if (!out_) throw IoError("cannot open " + path + " for writing");
  }
  void write_line(const std::string& line) override {
    out_ << line << '\n';
    if (!out_) throw IoError("write failed for " + path_);
  }
  void close() override {
    out_.close();
    if (out_.fail()) throw IoError("close failed for " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class GzWriter : public LineWriter {
 public:
  GzWriter(const std::string& path, bool append) : path_(path) {
    f_ = gzopen(path.c_str(), append ? "ab9" : "wb9");
    if (!f_) throw IoError("cannot open " + path + " for writing");
  }
  ~GzWriter() override {
    if (f_) gzclose(f_);
  }
  void write_line(const std::string& line) override {
    const std::string data = line + "\n";
    if (gzwrite(f_, data.data(), static_cast<unsigned>(data.size())) != static_cast<int>(data.size())) {
      throw IoError("write failed for " + path_);
    }
  }
  void close() override {
    if (!f_) return;
    const int rc = gzclose(f_);
    f_ = nullptr;
    if (rc != Z_OK) throw IoError("close failed for " + path_);
  }

 private:
  std::string path_;
  gzFile f_ = nullptr;
};

}  // namespace

std::unique_ptr<LineWriter> open_line_writer(const std::string& path, bool append) {
  if (has_gz_suffix(path)) return std::make_unique<GzWriter>(path, append);
  return std::make_unique<PlainWriter>(path, append);
}

}  // namespace prosched
