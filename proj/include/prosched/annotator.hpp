#pragma once

// Oracle annotation pipeline. The language model sits behind
// CompletionProvider; everything else (prompting, retries, parsing, batch
// scheduling, output ordering) is deterministic.

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosched/catalog.hpp"
#include "prosched/records.hpp"
#include "prosched/types.hpp"

namespace prosched {

struct AnnotatorConfig {
  std::string model_id = "oracle";
  double temperature = 0.1;
  int max_tokens = 4000;
  int batch_size = 5;
  int max_retries = 3;
  bool with_future = true;
  int max_workers = 4;
  int start_index = 0;
  std::optional<int> max_dialogues;
  std::string output_suffix = "_annotated";
  std::string system_prompt;  // empty selects the built-in default
  std::string task_prompt;    // empty selects the built-in default
  std::string catalog_path;
  std::string log_file;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reads the llm / tool_catalog / annotation / output / prompts / logging
/// YAML layout. Unknown keys throw ConfigError naming the key.
AnnotatorConfig load_annotator_config(const std::string& path);
AnnotatorConfig parse_annotator_config(const std::string& yaml_text);

const std::string& default_system_prompt();
const std::string& default_task_prompt();

struct TemplateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Substitutes {name} placeholders; "{{" and "}}" produce literal braces.
std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& vars);

/// One line per turn: `Turn i: speaker says: "text"`. Turns after t are
/// omitted unless with_future is set.
std::string format_dialogue_context(const Dialogue& d, int t, bool with_future);

struct AnnotationPrompt {
  std::string system;
  std::string user;
};

AnnotationPrompt build_annotation_prompt(const Dialogue& d, int t, const ActionCatalog& catalog,
                                         bool with_future, const AnnotatorConfig& cfg = {});

struct CompletionRequest {
  std::string system;
  std::string user;
  std::string model;
  double temperature = 0;
  int max_tokens = 0;
  std::string dialogue_id;
  int turn = 1;
  int attempt = 1;
};

struct ProviderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using CompletionProvider = std::function<std::string(const CompletionRequest&)>;

struct AnnotationParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParsedTurn {
  std::vector<ActionInstance> actions;
  std::vector<std::string> questions;
};

ParsedTurn parse_annotation_response(const std::string& text, int expected_turn);

struct DialogueAnnotation {
  Dialogue dialogue;
  ReferenceRange ranges;
  std::vector<std::string> violations;
  int retries = 0;
  int failed_turns = 0;
};

DialogueAnnotation annotate_dialogue(const Dialogue& d, const ActionCatalog& catalog,
                                     const CompletionProvider& provider, const AnnotatorConfig& cfg);

nlohmann::json annotation_record(const DialogueAnnotation& a);

struct BatchWriteError : std::runtime_error {
  BatchWriteError(const std::string& msg, int completed_count, int resume)
      : std::runtime_error(msg), completed(completed_count), resume_index(resume) {}
  int completed;     // records durably written before the failure
  int resume_index;  // start_index to pass on the next run
};

struct BatchReport {
  int start_index = 0;
  int processed = 0;
  std::vector<std::string> dialogue_ids;
  int failed_turns = 0;
  int retries = 0;
  int violations = 0;
  int next_index = 0;
};

/// Append-only, thread-safe progress log.
class ProgressLog {
 public:
  explicit ProgressLog(std::ostream* out) : out_(out) {}
  void record(const std::string& line);

 private:
  std::ostream* out_;
  std::mutex mu_;
};

/// Annotates dialogues[start_index ..] (at most max_dialogues of them) on up
/// to max_workers threads. Records reach the sink in index order, so the
/// output does not depend on the worker count.
BatchReport run_batch(const std::vector<Dialogue>& dialogues, const ActionCatalog& catalog,
                      const CompletionProvider& provider, const AnnotatorConfig& cfg, LineWriter& sink,
                      ProgressLog* progress = nullptr);

/// "<stem><suffix>.jsonl.gz" next to the input.
std::string annotated_output_path(const std::string& input_path, const std::string& suffix);

}  // namespace prosched
