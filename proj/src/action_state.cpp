#include "prosched/action_state.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace prosched {

bool is_ready(TriggerStatus s) {
  return s == TriggerStatus::kReadyToTrigger || s == TriggerStatus::kTriggered;
}

bool is_valid_transition(TriggerStatus from, TriggerStatus to) {
  auto valid = [](TriggerStatus s) {
    return std::find(std::begin(kAllStatuses), std::end(kAllStatuses), s) !=
           std::end(kAllStatuses);
  };
  return valid(from) && valid(to);
}

std::vector<ActionInstance> update_action_states(std::vector<ActionInstance> state,
                                                 const std::vector<ActionInstance>& new_actions,
                                                 bool is_triggered) {
  for (const ActionInstance& a : new_actions) {
    auto it = std::find_if(state.begin(), state.end(),
                           [&](const ActionInstance& s) { return s.spec_name == a.spec_name; });
    if (it == state.end()) {
      state.push_back(a);
    } else if (is_triggered || is_valid_transition(it->status, a.status)) {
      *it = a;
    }
  }
  return state;
}

ReferenceRange compute_reference_ranges(const Dialogue& d) {
  ReferenceRange r;
  for (const TurnAnnotation& ta : d.turns) {
    for (const ActionInstance& a : ta.actions) {
      r.occurrences[a.spec_name].emplace_back(ta.turn.index, a.status);
      if (is_ready(a.status)) r.per_action[a.spec_name].insert(ta.turn.index);
    }
  }
  return r;
}

namespace {

void check_params(const std::vector<ParameterSpec>& params, const std::string& where,
                  std::set<std::string>& seen, std::vector<std::string>& out) {
  for (const ParameterSpec& p : params) {
    if (p.name.empty()) out.push_back(where + ": empty parameter name");
    if (!seen.insert(p.name).second) out.push_back(where + ": duplicate parameter " + p.name);
    if (!p.provided && p.value) out.push_back(where + ": " + p.name + " has a value but provided=false");
  }
}

}  // namespace

std::vector<std::string> validate_dialogue(const Dialogue& d) {
  std::vector<std::string> out;
  if (d.id.empty()) out.push_back("dialogue id is empty");
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const TurnAnnotation& ta = d.turns[i];
    const int expected = static_cast<int>(i) + 1;
    if (ta.turn.index != expected) {
      out.push_back("dialogue " + d.id + ": turn " + std::to_string(ta.turn.index) +
                    " at position " + std::to_string(expected));
    }
    for (const ActionInstance& a : ta.actions) {
      const std::string where = "dialogue " + d.id + " turn " + std::to_string(ta.turn.index) +
                                " action " + a.spec_name;
      if (a.spec_name.empty()) out.push_back(where + ": empty action name");
      std::set<std::string> seen;
      check_params(a.inputs_required, where, seen, out);
      check_params(a.inputs_optional, where, seen, out);
    }
  }
  if (d.observed_triggers) {
    for (const TriggerRef& t : *d.observed_triggers) {
      if (t.turn < 1) out.push_back("dialogue " + d.id + ": observed trigger turn < 1");
    }
  }
  return out;
}

}  // namespace prosched
