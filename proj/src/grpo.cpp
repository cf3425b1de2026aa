#include "prosched/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prosched {

std::vector<double> group_advantages(const GroupRewards& g, StdKind kind) {
  const std::size_t k = g.rewards.size();
  std::vector<double> adv(k, 0.0);
  if (k == 0) return adv;
  double mean = 0.0;
  for (double r : g.rewards) mean += r;
  mean /= static_cast<double>(k);
  double ss = 0.0;
  for (double r : g.rewards) ss += (r - mean) * (r - mean);
  const double dof = kind == StdKind::kSample ? static_cast<double>(k) - 1.0 : static_cast<double>(k);
  if (dof <= 0) return adv;
  const double sd = std::sqrt(ss / dof);
  if (sd < kAdvantageStdFloor) return adv;
  for (std::size_t i = 0; i < k; ++i) adv[i] = (g.rewards[i] - mean) / sd;
  return adv;
}

double cap_clip_weight(double ratio, double advantage, const ClipConfig& c) {
  if (!(ratio >= 0)) throw std::invalid_argument("importance ratio must be non-negative");
  if (!(c.epsilon > 0 && c.epsilon < 1 && c.epsilon_high > 0 && c.epsilon_high < 1)) {
    throw std::invalid_argument("clip epsilons must lie in (0, 1)");
  }
  if (!(c.ratio_cap >= 1)) throw std::invalid_argument("ratio cap must be at least 1");
  const double capped = std::min(ratio, c.ratio_cap);
  const double clipped = std::clamp(capped, 1.0 - c.epsilon, 1.0 + c.epsilon_high);
  const double unclipped_term = capped * advantage;
  const double clipped_term = clipped * advantage;
  return unclipped_term <= clipped_term ? unclipped_term : clipped_term;
}

std::vector<CandidateUpdate> turn_update_weights(const GroupRewards& g, const std::vector<double>& ratios,
                                                 const ClipConfig& c, StdKind kind) {
  if (ratios.size() != g.rewards.size()) {
    throw std::invalid_argument("ratio count does not match group size");
  }
  const auto adv = group_advantages(g, kind);
  std::vector<CandidateUpdate> out;
  out.reserve(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) {
    out.push_back({adv[i], ratios[i], cap_clip_weight(ratios[i], adv[i], c)});
  }
  return out;
}

}  // namespace prosched
