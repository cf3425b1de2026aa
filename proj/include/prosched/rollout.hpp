#pragma once

// Rollout records: one scenario (dialogue turn) with K sampled trajectories,
// the metric scores stored alongside them, and optional judge scores.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosched/ruler.hpp"
#include "prosched/types.hpp"

namespace prosched {

struct TrajectoryScores {
  double rac = 0;
  double max_rac = 0;
  double ptr = 0;
  double ftr = 0;
  friend bool operator==(const TrajectoryScores&, const TrajectoryScores&) = default;
};

struct RolloutTrajectory {
  std::string id;
  TurnPrediction predicted;
  TrajectoryScores metrics;
  std::optional<double> judge_score;
  std::optional<double> reward;
  std::optional<double> advantage;
  friend bool operator==(const RolloutTrajectory&, const RolloutTrajectory&) = default;
};

struct RolloutRecord {
  std::string scenario_id;
  std::string dialogue_id;
  int turn = 1;
  std::string system_message;
  std::string user_message;
  std::vector<ActionInstance> reference;
  std::optional<ReferenceRange> ranges;  // absent: scores cannot be recomputed
  std::vector<RolloutTrajectory> trajectories;
  friend bool operator==(const RolloutRecord&, const RolloutRecord&) = default;
};

void to_json(nlohmann::json& j, const RolloutRecord& r);
void from_json(const nlohmann::json& j, RolloutRecord& r);

/// Undefined metrics score 0.
TrajectoryScores score_trajectory(const TurnPrediction& predicted, const std::vector<ActionInstance>& reference,
                                  const ReferenceRange& ranges, int turn);

/// Stored scores that disagree with a recomputation from the payload.
std::vector<std::string> check_self_consistency(const RolloutRecord& r, double tol = 1e-9);

RulerGroup ruler_group(const RolloutRecord& r);

}  // namespace prosched
