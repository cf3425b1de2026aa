#include "prosched/rewards.hpp"

#include <algorithm>
#include <map>

#include "text_util.hpp"

namespace prosched {

std::string_view to_string(RewardRule r) {
  switch (r) {
    case RewardRule::kRac: return "rac";
    case RewardRule::kMaxRac: return "max_rac";
    case RewardRule::kRuler: return "ruler";
    case RewardRule::kCustomRuler: return "custom_ruler";
    case RewardRule::kWeightedMetric: return "weighted_metric";
    case RewardRule::kAdaptiveMetric: return "adaptive_metric";
    case RewardRule::kHybridRuler: return "hybrid_ruler";
    case RewardRule::kAdaptiveRuler: return "adaptive_ruler";
  }
  return "rac";
}

std::string_view to_string(MetricBase b) { return b == MetricBase::kRac ? "rac" : "max_rac"; }

ParsedRule parse_reward_rule(std::string_view name) {
  using R = RewardRule;
  using B = MetricBase;
  static const std::map<std::string, ParsedRule> kRules = {
      {"rac", {R::kRac, B::kRac}},
      {"max_rac", {R::kMaxRac, B::kMaxRac}},
      {"ruler", {R::kRuler, std::nullopt}},
      {"custom_ruler", {R::kCustomRuler, std::nullopt}},
      {"weighted_metric", {R::kWeightedMetric, std::nullopt}},
      {"adaptive_metric", {R::kAdaptiveMetric, std::nullopt}},
      {"hybrid_ruler", {R::kHybridRuler, std::nullopt}},
      {"adaptive_ruler", {R::kAdaptiveRuler, std::nullopt}},
      {"rac_score", {R::kRac, B::kRac}},
      {"max_rac_score", {R::kMaxRac, B::kMaxRac}},
      {"weighted_rac_score", {R::kWeightedMetric, B::kRac}},
      {"weighted_max_rac_score", {R::kWeightedMetric, B::kMaxRac}},
      {"adaptive_metric_score", {R::kAdaptiveMetric, std::nullopt}},
      {"hybrid_ruler_weighted_rac_score", {R::kHybridRuler, B::kRac}},
      {"hybrid_ruler_weighted_max_rac_score", {R::kHybridRuler, B::kMaxRac}},
      {"schedule_ruler_weighted_rac_score", {R::kAdaptiveRuler, B::kRac}},
      {"schedule_ruler_weighted_max_rac_score", {R::kAdaptiveRuler, B::kMaxRac}},
  };
  auto it = kRules.find(detail::ascii_lower(detail::trim(name)));
  if (it == kRules.end()) throw RewardError("unknown reward rule: " + std::string(name));
  return it->second;
}

MetricBase parse_metric_base(std::string_view name) {
  const std::string n = detail::ascii_lower(detail::trim(name));
  if (n == "rac") return MetricBase::kRac;
  if (n == "max_rac") return MetricBase::kMaxRac;
  throw RewardError("unknown metric base: " + std::string(name));
}

bool rule_requires_judge(RewardRule r) {
  return r == RewardRule::kRuler || r == RewardRule::kCustomRuler ||
         r == RewardRule::kHybridRuler || r == RewardRule::kAdaptiveRuler;
}

bool rule_is_stage_aware(RewardRule r) {
  return r == RewardRule::kAdaptiveMetric || r == RewardRule::kAdaptiveRuler;
}

double metric_reward(const TurnRewardInput& in, MetricBase base) {
  return base == MetricBase::kRac ? in.rac : in.max_rac;
}

double trajectory_mean(std::span<const double> turn_values) {
  if (turn_values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : turn_values) sum += v;
  return sum / static_cast<double>(turn_values.size());
}

double weighted_metric_reward(const TurnRewardInput& in, MetricBase base,
                              const WeightedMetricWeights& w) {
  return metric_reward(in, base) + w.ptr * in.ptr - w.ftr * in.ftr;
}

namespace {

void check_step(int u, int total_steps) {
  if (total_steps < 1) throw RewardError("total steps must be at least 1");
  if (u < 0 || u >= total_steps) {
    throw RewardError("step " + std::to_string(u) + " outside [0, " + std::to_string(total_steps) + ")");
  }
}

double judge_score(const TurnRewardInput& in) {
  if (!in.ruler) throw RewardError("judge score required");
  return *in.ruler;
}

}  // namespace

int adaptive_phase(int u, int total_steps) {
  check_step(u, total_steps);
  // Integer form of u/U < 1/3 and u/U < 2/3, exact at the boundaries.
  const long long uu = u, tt = total_steps;
  if (3 * uu < tt) return 1;
  if (3 * uu < 2 * tt) return 2;
  return 3;
}

double adaptive_metric_reward(const TurnRewardInput& in, int u, int total_steps,
                              const AdaptiveMetricWeights& w) {
  switch (adaptive_phase(u, total_steps)) {
    case 1: return w.w1 * in.max_rac + (1.0 - w.w1) * in.ptr;
    case 2: return w.w2 * in.rac + w.w3 * in.ptr - (1.0 - w.w2 - w.w3) * in.ftr;
    default: return w.w4 * in.rac - (1.0 - w.w4) * in.ftr;
  }
}

double hybrid_ruler_reward(const TurnRewardInput& in, double lambda, MetricBase base) {
  if (lambda < 0 || lambda > 1) throw RewardError("lambda must lie in [0, 1]");
  const double judge = judge_score(in);
  return (1.0 - lambda) * metric_reward(in, base) + lambda * judge;
}

double scheduled_lambda(int u, int total_steps, double lambda_max) {
  check_step(u, total_steps);
  if (total_steps == 1) return lambda_max;
  const double frac = static_cast<double>(u) / static_cast<double>(total_steps - 1);
  return lambda_max * std::min(1.0, frac);
}

double adaptive_ruler_reward(const TurnRewardInput& in, int u, int total_steps, double lambda_max,
                             MetricBase base) {
  if (lambda_max < 0 || lambda_max > 1) throw RewardError("lambda_max must lie in [0, 1]");
  const double judge = judge_score(in);
  const double lam = scheduled_lambda(u, total_steps, lambda_max);
  return (1.0 - lam) * metric_reward(in, base) + lam * judge;
}

double compute_reward(const TurnRewardInput& in, const RewardSchedule& s, int u) {
  switch (s.rule) {
    case RewardRule::kRac: return metric_reward(in, MetricBase::kRac);
    case RewardRule::kMaxRac: return metric_reward(in, MetricBase::kMaxRac);
    case RewardRule::kRuler:
    case RewardRule::kCustomRuler: return judge_score(in);
    case RewardRule::kWeightedMetric: return weighted_metric_reward(in, s.base, s.weighted);
    case RewardRule::kAdaptiveMetric: return adaptive_metric_reward(in, u, s.total_steps, s.adaptive);
    case RewardRule::kHybridRuler: return hybrid_ruler_reward(in, s.lambda, s.base);
    case RewardRule::kAdaptiveRuler:
      return adaptive_ruler_reward(in, u, s.total_steps, s.lambda_max, s.base);
  }
  throw RewardError("unhandled reward rule");
}

}  // namespace prosched
