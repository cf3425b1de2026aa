#pragma once

#include <string>
#include <vector>

#include "prosched/ruler.hpp"

namespace testkit {

// The group and custom rule behind tests/data/ruler_*.golden.txt.
inline prosched::RulerGroup golden_ruler_group() {
  return {"scn-7",
          "You track proactive actions for a mortgage advisor.",
          "Turn 4: \"Could you tell me what a payment would look like over 30 years?\"",
          {"<think>Payment question, all inputs known.</think>\n<action>calculate_payment ready_to_trigger</action>",
           "<think>Too early.</think>\n<action>calculate_payment pending</action>",
           "<think>Identity first.</think>\n<action>verify_identity triggered</action>"}};
}

inline const std::string kGoldenCustomRule =
    "Reward trajectories that mark an action ready only once every required input is known, and penalize "
    "triggering actions the client never needed.";

}  // namespace testkit
