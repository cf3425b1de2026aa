#pragma once

#include <vector>

#include "prosched/types.hpp"

namespace prosched {

bool is_ready(TriggerStatus s);

// The status lattice is a complete directed graph with self-loops.
bool is_valid_transition(TriggerStatus from, TriggerStatus to);

std::vector<ActionInstance> update_action_states(std::vector<ActionInstance> state,
                                                 const std::vector<ActionInstance>& new_actions,
                                                 bool is_triggered);

ReferenceRange compute_reference_ranges(const Dialogue& d);

/// Structural checks: contiguous 1-based turn indices, parameter invariants.
std::vector<std::string> validate_dialogue(const Dialogue& d);

}  // namespace prosched
