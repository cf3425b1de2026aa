#pragma once

// Turn-level reward rules: plain metric rewards, a fixed-weight metric
// combination, a three-phase schedule over training progress, and judge
// blends with fixed or linearly ramped weight.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace prosched {

enum class RewardRule {
  kRac,
  kMaxRac,
  kRuler,
  kCustomRuler,
  kWeightedMetric,
  kAdaptiveMetric,
  kHybridRuler,
  kAdaptiveRuler,
};

enum class MetricBase { kRac, kMaxRac };

std::string_view to_string(RewardRule r);
std::string_view to_string(MetricBase b);

struct ParsedRule {
  RewardRule rule;
  std::optional<MetricBase> base;  // set when the identifier names one
};

/// Accepts short names ("adaptive_ruler") and the long configuration
/// identifiers ("schedule_ruler_weighted_max_rac_score").
ParsedRule parse_reward_rule(std::string_view name);
MetricBase parse_metric_base(std::string_view name);

bool rule_requires_judge(RewardRule r);
bool rule_is_stage_aware(RewardRule r);

struct TurnRewardInput {
  double rac = 0;
  double max_rac = 0;
  double ptr = 0;  // the turn's proactive-timing value
  double ftr = 0;
  std::optional<double> ruler;
};

struct WeightedMetricWeights {
  double ptr = 0.05;
  double ftr = 0.01;
};

// Phase coefficients: phase 1 = w1*MaxRAC + (1-w1)*PTR,
// phase 2 = w2*RAC + w3*PTR - (1-w2-w3)*FTR, phase 3 = w4*RAC - (1-w4)*FTR.
struct AdaptiveMetricWeights {
  double w1 = 0.8;
  double w2 = 0.6;
  double w3 = 0.3;
  double w4 = 0.6;
};

struct RewardSchedule {
  RewardRule rule = RewardRule::kRac;
  MetricBase base = MetricBase::kRac;
  WeightedMetricWeights weighted;
  AdaptiveMetricWeights adaptive;
  double lambda = 0.3;      // fixed judge weight for hybrid blends
  double lambda_max = 0.3;  // ramp ceiling for the scheduled blend
  int total_steps = 1;      // U
};

struct RewardError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double metric_reward(const TurnRewardInput& in, MetricBase base);

/// Running mean of per-turn values, the trajectory-level form of any turn reward.
double trajectory_mean(std::span<const double> turn_values);

double weighted_metric_reward(const TurnRewardInput& in, MetricBase base,
                              const WeightedMetricWeights& w = {});

/// 1, 2 or 3. Boundaries are left-closed: u/U == 1/3 is phase 2.
int adaptive_phase(int u, int total_steps);

double adaptive_metric_reward(const TurnRewardInput& in, int u, int total_steps,
                              const AdaptiveMetricWeights& w = {});

double hybrid_ruler_reward(const TurnRewardInput& in, double lambda, MetricBase base);

double scheduled_lambda(int u, int total_steps, double lambda_max);

double adaptive_ruler_reward(const TurnRewardInput& in, int u, int total_steps, double lambda_max,
                             MetricBase base);

/// Dispatches on schedule.rule; u is the current step.
double compute_reward(const TurnRewardInput& in, const RewardSchedule& schedule, int u);

}  // namespace prosched
