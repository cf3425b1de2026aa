#pragma once

#include <vector>

namespace prosched {

struct GroupRewards {
  std::vector<double> rewards;  // one per rollout of the same turn
  int step = 0;
};

enum class StdKind { kPopulation, kSample };

struct ClipConfig {
  double epsilon = 0.2;
  double epsilon_high = 0.2;
  double ratio_cap = 10.0;
};

struct CandidateUpdate {
  double advantage = 0;
  double ratio = 0;
  double weight = 0;
};

inline constexpr double kAdvantageStdFloor = 1e-8;

/// (r - mean) / std within the group; all zeros when std < 1e-8.
std::vector<double> group_advantages(const GroupRewards& g, StdKind kind = StdKind::kPopulation);

/// Caps the importance ratio, then takes the smaller of the capped and the
/// clipped surrogate. Throws std::invalid_argument for a negative ratio or
/// an invalid config.
double cap_clip_weight(double ratio, double advantage, const ClipConfig& c = {});

std::vector<CandidateUpdate> turn_update_weights(const GroupRewards& g, const std::vector<double>& ratios,
                                                 const ClipConfig& c = {},
                                                 StdKind kind = StdKind::kPopulation);

}  // namespace prosched
