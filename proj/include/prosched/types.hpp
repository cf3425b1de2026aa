#pragma once

// Core value types shared by every module: trigger statuses, action
// instances with partial parameter fill, annotated dialogues and the
// per-action reference ranges derived from them.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace prosched {

enum class TriggerStatus { kPending, kReadyToTrigger, kTriggered, kRepeatable, kDismissed };

inline constexpr TriggerStatus kAllStatuses[] = {
    TriggerStatus::kPending, TriggerStatus::kReadyToTrigger, TriggerStatus::kTriggered,
    TriggerStatus::kRepeatable, TriggerStatus::kDismissed};

/// Lower-case wire name, e.g. "ready_to_trigger".
std::string_view to_string(TriggerStatus s);
/// Accepts the wire names case-insensitively. Throws std::invalid_argument.
TriggerStatus parse_trigger_status(std::string_view text);

enum class Level { kLow, kMedium, kHigh };
std::string_view to_string(Level l);
Level parse_level(std::string_view text);

enum class ParamKind { kRequired, kOptional };
std::string_view to_string(ParamKind k);
ParamKind parse_param_kind(std::string_view text);

struct ParameterSpec {
  std::string name;
  ParamKind kind = ParamKind::kRequired;
  bool provided = false;
  std::optional<std::string> value;

  friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;
};

struct ActionInstance {
  std::string spec_name;
  std::string description;
  std::vector<ParameterSpec> inputs_required;
  std::vector<ParameterSpec> inputs_optional;
  Level readiness_maturity = Level::kLow;
  Level trigger_confidence = Level::kLow;
  TriggerStatus status = TriggerStatus::kPending;

  friend bool operator==(const ActionInstance&, const ActionInstance&) = default;
};

struct Turn {
  int index = 1;
  std::string speaker;
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct TurnAnnotation {
  Turn turn;
  std::vector<ActionInstance> actions;
  std::vector<std::string> questions;
  // Set by the annotator when every attempt for this turn failed.
  std::optional<std::string> failure;

  friend bool operator==(const TurnAnnotation&, const TurnAnnotation&) = default;
};

struct TriggerRef {
  int turn = 1;
  std::string action;

  friend bool operator==(const TriggerRef&, const TriggerRef&) = default;
  friend auto operator<=>(const TriggerRef&, const TriggerRef&) = default;
};

struct Dialogue {
  std::string id;
  std::vector<TurnAnnotation> turns;
  std::optional<std::vector<TriggerRef>> observed_triggers;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

struct ReferenceRange {
  // Ready turns per action; actions that never become ready have no entry.
  std::map<std::string, std::set<int>> per_action;
  // Every (turn, status) occurrence per action, in dialogue order.
  std::map<std::string, std::vector<std::pair<int, TriggerStatus>>> occurrences;

  const std::set<int>* ready_turns(const std::string& action) const;
  /// Union of all per-action ready turns.
  std::set<int> all_ready_turns() const;

  friend bool operator==(const ReferenceRange&, const ReferenceRange&) = default;
};

// A dialogue turn's prediction, produced by an agent under evaluation.
struct TurnPrediction {
  std::vector<ActionInstance> actions;
  std::vector<std::string> questions;

  friend bool operator==(const TurnPrediction&, const TurnPrediction&) = default;
};

// Reference annotations plus one prediction per turn.
struct EvalDialogue {
  Dialogue reference;
  std::vector<TurnPrediction> predictions;  // parallel to reference.turns

  friend bool operator==(const EvalDialogue&, const EvalDialogue&) = default;
};

}  // namespace prosched
