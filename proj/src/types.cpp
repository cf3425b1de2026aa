#include "prosched/types.hpp"

#include "text_util.hpp"

namespace prosched {

std::string_view to_string(TriggerStatus s) {
  switch (s) {
    case TriggerStatus::kPending: return "pending";
    case TriggerStatus::kReadyToTrigger: return "ready_to_trigger";
    case TriggerStatus::kTriggered: return "triggered";
    case TriggerStatus::kRepeatable: return "repeatable";
    case TriggerStatus::kDismissed: return "dismissed";
  }
  return "pending";
}

TriggerStatus parse_trigger_status(std::string_view text) {
  const std::string t = detail::ascii_lower(detail::trim(text));
  for (TriggerStatus s : kAllStatuses) {
    if (t == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown trigger status: " + std::string(text));
}

std::string_view to_string(Level l) {
  switch (l) {
    case Level::kLow: return "low";
    case Level::kMedium: return "medium";
    case Level::kHigh: return "high";
  }
  return "low";
}

Level parse_level(std::string_view text) {
  const std::string t = detail::ascii_lower(detail::trim(text));
  if (t == "low") return Level::kLow;
  if (t == "medium") return Level::kMedium;
  if (t == "high") return Level::kHigh;
  throw std::invalid_argument("unknown level: " + std::string(text));
}

std::string_view to_string(ParamKind k) {
  return k == ParamKind::kRequired ? "required" : "optional";
}

ParamKind parse_param_kind(std::string_view text) {
  const std::string t = detail::ascii_lower(detail::trim(text));
  if (t == "required") return ParamKind::kRequired;
  if (t == "optional") return ParamKind::kOptional;
  throw std::invalid_argument("unknown parameter kind: " + std::string(text));
}

const std::set<int>* ReferenceRange::ready_turns(const std::string& action) const {
  auto it = per_action.find(action);
  return it == per_action.end() ? nullptr : &it->second;
}

std::set<int> ReferenceRange::all_ready_turns() const {
  std::set<int> out;
  for (const auto& [_, turns] : per_action) out.insert(turns.begin(), turns.end());
  return out;
}

}  // namespace prosched
