#include <doctest.h>

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "prosched/action_state.hpp"
#include "prosched/annotator.hpp"
#include "prosched/synth.hpp"
#include "testkit.hpp"

using namespace prosched;

namespace {

class MemorySink : public LineWriter {
 public:
  explicit MemorySink(int fail_at = -1) : fail_at_(fail_at) {}
  void write_line(const std::string& line) override {
    if (static_cast<int>(lines.size()) == fail_at_) throw IoError("disk full");
    lines.push_back(line);
  }
  void close() override { closed = true; }
  std::vector<std::string> lines;
  bool closed = false;

 private:
  int fail_at_;
};

Dialogue five_turns() {
  Dialogue d;
  d.id = "d5";
  const char* texts[] = {"alpha one", "bravo two", "charlie three", "delta four", "echo five"};
  for (int t = 1; t <= 5; ++t) d.turns.push_back({{t, t % 2 ? "client" : "advisor", texts[t - 1]}, {}, {}, std::nullopt});
  return d;
}

CompletionProvider scripted(const std::vector<Dialogue>& annotated, bool flaky = false) {
  std::map<std::string, const Dialogue*> by_id;
  for (const Dialogue& d : annotated) by_id[d.id] = &d;
  return [by_id, flaky](const CompletionRequest& r) {
    return scripted_annotation_response(*by_id.at(r.dialogue_id), r.turn, r.attempt, flaky);
  };
}

std::vector<Dialogue> synth(int n, std::uint64_t seed) {
  SynthOptions opt;
  opt.dialogues = n;
  opt.seed = seed;
  return synth_dialogues(opt);
}

}  // namespace

TEST_CASE("annotator config layout") {
  const AnnotatorConfig c = parse_annotator_config(R"(
llm:
  model: oracle-large
  temperature: 0.2
annotation:
  max_workers: 2
  with_future: false
  max_dialogues: 7
output:
  output_suffix: _ann
)");
  CHECK(c.model_id == "oracle-large");
  CHECK(c.max_workers == 2);
  CHECK_FALSE(c.with_future);
  CHECK(*c.max_dialogues == 7);
  CHECK(c.output_suffix == "_ann");
  CHECK(c.max_retries == 3);
  CHECK_THROWS_WITH(parse_annotator_config("annotation:\n  max_wrokers: 2\n"), doctest::Contains("annotation.max_wrokers"));
  CHECK_THROWS_AS(parse_annotator_config("annotation:\n  max_workers: many\n"), ConfigError);
  CHECK_THROWS_AS(parse_annotator_config("annotation:\n  retry_on_failure: false\nbogus: 1\n"), ConfigError);
  CHECK(parse_annotator_config("annotation:\n  retry_on_failure: false\n").max_retries == 0);
}

TEST_CASE("templates") {
  CHECK(render_template("a {x} {{y}}", {{"x", "1"}}) == "a 1 {y}");
  CHECK_THROWS_WITH(render_template("{missing}", {}), doctest::Contains("{missing}"));
  CHECK_THROWS_AS(render_template("{open", {}), TemplateError);
  CHECK_THROWS_AS(render_template("close}", {}), TemplateError);
}

TEST_CASE("hindsight and causal prompts") {
  const Dialogue d = five_turns();
  const ActionCatalog cat = synthetic_catalog();
  const AnnotationPrompt full = build_annotation_prompt(d, 2, cat, true);
  for (const char* text : {"alpha one", "echo five"}) CHECK(full.user.find(text) != std::string::npos);
  const AnnotationPrompt causal = build_annotation_prompt(d, 2, cat, false);
  CHECK(causal.user.find("alpha one") != std::string::npos);
  CHECK(causal.user.find("bravo two") != std::string::npos);
  for (const char* text : {"charlie three", "delta four", "echo five", "Turn 3:"}) {
    CHECK(causal.user.find(text) == std::string::npos);
  }
  const std::string catalog_text = render_catalog_text(cat);
  CHECK(full.user.find(catalog_text) != std::string::npos);
  CHECK(full.user.find(catalog_text, full.user.find(catalog_text) + 1) == std::string::npos);
  CHECK(full.user.find("{turn_number}") == std::string::npos);
  CHECK(build_annotation_prompt(d, 2, cat, true).user == full.user);
  CHECK_THROWS(build_annotation_prompt(d, 9, cat, true));

  AnnotatorConfig cfg;
  cfg.task_prompt = "turn {turn_number} {unknown}";
  CHECK_THROWS_AS(build_annotation_prompt(d, 1, cat, true, cfg), TemplateError);
}

TEST_CASE("causal prompts never carry later turns") {
  const auto dialogues = testkit::load_dialogues(testkit::data_path("fixture_dialogues.jsonl"));
  REQUIRE(dialogues.size() == 20);
  const ActionCatalog cat = synthetic_catalog();
  for (const Dialogue& d : dialogues) {
    for (const TurnAnnotation& cur : d.turns) {
      const int t = cur.turn.index;
      const std::string user = build_annotation_prompt(d, t, cat, false).user;
      std::set<std::string> seen;
      for (const TurnAnnotation& ta : d.turns) {
        if (ta.turn.index <= t) seen.insert(ta.turn.text);
      }
      for (const TurnAnnotation& ta : d.turns) {
        if (ta.turn.index <= t) continue;
        CHECK(user.find("Turn " + std::to_string(ta.turn.index) + ":") == std::string::npos);
        if (!seen.count(ta.turn.text)) CHECK(user.find(ta.turn.text) == std::string::npos);
      }
    }
  }
}

TEST_CASE("response parsing") {
  const std::string ok = R"(Sure.
```json
{"dialogue_turn": 3, "proactive_annotations": [{"action_opportunity": {"name": "lock_rate",
  "inputs": {"required": [{"input_name": "loan_id", "provided": true, "value": "L-1"},
                          {"input_name": "rate", "provided": false, "value": "ignored"}],
             "optional": [],
             "readiness_maturity": "medium", "trigger_confidence": "high",
             "action_trigger_status": "pending"}}}],
 "questions": ["Which rate?"]}
```)";
  const ParsedTurn p = parse_annotation_response(ok, 3);
  REQUIRE(p.actions.size() == 1);
  CHECK(p.actions[0].spec_name == "lock_rate");
  CHECK(p.actions[0].inputs_required[0].value == std::optional<std::string>("L-1"));
  CHECK_FALSE(p.actions[0].inputs_required[1].value.has_value());
  CHECK(p.actions[0].trigger_confidence == Level::kHigh);
  CHECK(p.questions == std::vector<std::string>{"Which rate?"});
  CHECK_THROWS_AS(parse_annotation_response(ok, 4), AnnotationParseError);
  CHECK_THROWS_AS(parse_annotation_response("nothing", 1), AnnotationParseError);
  CHECK_THROWS_AS(parse_annotation_response(R"({"proactive_annotations": [{"name": "x"}]})", 1), AnnotationParseError);
  CHECK_THROWS_AS(parse_annotation_response(R"({"proactive_annotations": [{"name": "x", "status": "soon"}]})", 1),
                  AnnotationParseError);
  CHECK(parse_annotation_response(R"({"proactive_annotations": []})", 1).actions.empty());
}

TEST_CASE("annotating with a scripted provider reproduces the source annotations") {
  const auto annotated = synth(6, 21);
  const ActionCatalog cat = synthetic_catalog();
  const CompletionProvider provider = scripted(annotated);
  for (const Dialogue& src : annotated) {
    const DialogueAnnotation a = annotate_dialogue(strip_annotations(src), cat, provider, {});
    CHECK(a.failed_turns == 0);
    CHECK(a.retries == 0);
    CHECK(a.violations.empty());
    REQUIRE(a.dialogue.turns.size() == src.turns.size());
    for (std::size_t i = 0; i < src.turns.size(); ++i) CHECK(a.dialogue.turns[i].actions == src.turns[i].actions);
    CHECK(a.ranges == compute_reference_ranges(src));
  }
}

TEST_CASE("retries and degradation") {
  const Dialogue d = five_turns();
  const ActionCatalog cat = synthetic_catalog();
  std::map<int, int> calls;
  const CompletionProvider twice_bad = [&](const CompletionRequest& r) -> std::string {
    if (++calls[r.turn] <= 2) return "not json";
    return "{\"dialogue_turn\": " + std::to_string(r.turn) + ", \"proactive_annotations\": []}";
  };
  DialogueAnnotation a = annotate_dialogue(d, cat, twice_bad, {});
  CHECK(a.failed_turns == 0);
  CHECK(a.retries == 2 * 5);

  const CompletionProvider dead = [](const CompletionRequest&) -> std::string { throw ProviderError("down"); };
  a = annotate_dialogue(d, cat, dead, {});
  CHECK(a.failed_turns == 5);
  for (const auto& ta : a.dialogue.turns) {
    REQUIRE(ta.failure.has_value());
    CHECK(ta.failure->find("4 attempts") != std::string::npos);
  }

  const CompletionProvider unknown = [](const CompletionRequest& r) {
    return "{\"dialogue_turn\": " + std::to_string(r.turn) +
           ", \"proactive_annotations\": [{\"name\": \"teleport\", \"action_trigger_status\": \"pending\"}]}";
  };
  a = annotate_dialogue(d, cat, unknown, {});
  CHECK(a.violations.size() == 5);
  CHECK(a.dialogue.turns[0].actions.size() == 1);
}

TEST_CASE("batch slicing, ordering and determinism") {
  const auto annotated = synth(10, 5);
  std::vector<Dialogue> raw;
  for (const auto& d : annotated) raw.push_back(strip_annotations(d));
  const ActionCatalog cat = synthetic_catalog();
  const CompletionProvider provider = scripted(annotated, true);

  AnnotatorConfig cfg;
  cfg.start_index = 4;
  cfg.max_dialogues = 3;
  MemorySink sink;
  const BatchReport rep = run_batch(raw, cat, provider, cfg, sink);
  CHECK(rep.dialogue_ids == std::vector<std::string>{"dlg-0005", "dlg-0006", "dlg-0007"});
  CHECK(rep.next_index == 7);
  CHECK(sink.closed);

  cfg = {};
  std::vector<std::string> outputs;
  for (int workers : {1, 4, 8}) {
    cfg.max_workers = workers;
    MemorySink s;
    std::ostringstream log;
    ProgressLog progress(&log);
    const BatchReport r = run_batch(raw, cat, provider, cfg, s, &progress);
    CHECK(r.processed == 10);
    CHECK(r.retries > 0);
    CHECK(r.failed_turns == 0);
    std::string joined;
    for (const auto& l : s.lines) joined += l + "\n";
    outputs.push_back(joined);
    int lines = 0;
    for (char c : log.str()) lines += c == '\n';
    CHECK(lines == 10);
  }
  CHECK(outputs[0] == outputs[1]);
  CHECK(outputs[0] == outputs[2]);
  CHECK_THROWS_AS(run_batch(raw, cat, provider, AnnotatorConfig{.start_index = 10}, sink), std::invalid_argument);
}

TEST_CASE("write failures report a resume point and resuming repeats nothing") {
  const auto annotated = synth(10, 8);
  std::vector<Dialogue> raw;
  for (const auto& d : annotated) raw.push_back(strip_annotations(d));
  const ActionCatalog cat = synthetic_catalog();
  const CompletionProvider provider = scripted(annotated);
  AnnotatorConfig cfg;
  MemorySink failing(6);
  int resume = -1;
  try {
    run_batch(raw, cat, provider, cfg, failing);
    FAIL("expected a write failure");
  } catch (const BatchWriteError& e) {
    CHECK(e.completed == 6);
    resume = e.resume_index;
  }
  REQUIRE(resume == 6);
  cfg.start_index = resume;
  MemorySink rest;
  run_batch(raw, cat, provider, cfg, rest);
  std::set<std::string> ids;
  for (const auto& l : failing.lines) ids.insert(nlohmann::json::parse(l).at("dialogue_id").get<std::string>());
  for (const auto& l : rest.lines) CHECK(ids.insert(nlohmann::json::parse(l).at("dialogue_id").get<std::string>()).second);
  CHECK(ids.size() == 10);
}

TEST_CASE("gzip batch output is byte-identical across worker counts") {
  const auto annotated = synth(12, 9);
  std::vector<Dialogue> raw;
  for (const auto& d : annotated) raw.push_back(strip_annotations(d));
  const ActionCatalog cat = synthetic_catalog();
  testkit::TempDir dir;
  std::vector<std::string> bytes;
  for (int workers : {1, 4}) {
    AnnotatorConfig cfg;
    cfg.max_workers = workers;
    const std::string path = dir.file("out" + std::to_string(workers) + ".jsonl.gz");
    auto w = open_line_writer(path);
    run_batch(raw, cat, scripted(annotated, true), cfg, *w);
    bytes.push_back(read_file(path));
  }
  CHECK(bytes[0].size() > 0);
  CHECK(bytes[0] == bytes[1]);
  CHECK(annotated_output_path("/x/calls.jsonl", "_annotated") == "/x/calls_annotated.jsonl.gz");
}
