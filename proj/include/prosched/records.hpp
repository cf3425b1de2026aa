#pragma once

// JSON mapping for datamodel records and line-delimited (optionally gzip)
// record files.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosched/types.hpp"

namespace prosched {

void to_json(nlohmann::json& j, const ParameterSpec& p);
void from_json(const nlohmann::json& j, ParameterSpec& p);
void to_json(nlohmann::json& j, const ActionInstance& a);
void from_json(const nlohmann::json& j, ActionInstance& a);
void to_json(nlohmann::json& j, const Turn& t);
void from_json(const nlohmann::json& j, Turn& t);
void to_json(nlohmann::json& j, const TurnAnnotation& t);
void from_json(const nlohmann::json& j, TurnAnnotation& t);
void to_json(nlohmann::json& j, const TriggerRef& t);
void from_json(const nlohmann::json& j, TriggerRef& t);
void to_json(nlohmann::json& j, const Dialogue& d);
void from_json(const nlohmann::json& j, Dialogue& d);
void to_json(nlohmann::json& j, const ReferenceRange& r);
void from_json(const nlohmann::json& j, ReferenceRange& r);
void to_json(nlohmann::json& j, const TurnPrediction& p);
void from_json(const nlohmann::json& j, TurnPrediction& p);

/// Evaluation records are dialogues whose turns each carry a "predicted" object.
nlohmann::json eval_dialogue_to_json(const EvalDialogue& d);
EvalDialogue eval_dialogue_from_json(const nlohmann::json& j);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool has_gz_suffix(const std::string& path);

// Reads every line of a plain or gzip file; gzip is detected by magic bytes.
std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

class LineWriter {
 public:
  virtual ~LineWriter() = default;
  virtual void write_line(const std::string& line) = 0;
  virtual void close() = 0;
};

/// Opens a writer; gzip when the path ends in ".gz". append=true continues
/// an existing file (a new gzip member for compressed output).
std::unique_ptr<LineWriter> open_line_writer(const std::string& path, bool append = false);

}  // namespace prosched
