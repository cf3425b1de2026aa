#include "prosched/rollout.hpp"

#include <cmath>

#include "prosched/metrics.hpp"
#include "prosched/records.hpp"

namespace prosched {

using nlohmann::json;

namespace {

json scores_to_json(const TrajectoryScores& s) {
  return {{"rac", s.rac}, {"max_rac", s.max_rac}, {"ptr", s.ptr}, {"ftr", s.ftr}};
}

TrajectoryScores scores_from_json(const json& j) {
  return {j.at("rac").get<double>(), j.at("max_rac").get<double>(), j.at("ptr").get<double>(),
          j.at("ftr").get<double>()};
}

}  // namespace

void to_json(json& j, const RolloutRecord& r) {
  j = json{{"scenario_id", r.scenario_id},       {"dialogue_id", r.dialogue_id},
           {"turn", r.turn},                     {"system_message", r.system_message},
           {"user_message", r.user_message},     {"reference", r.reference}};
  if (r.ranges) j["reference_ranges"] = *r.ranges;
  json trajs = json::array();
  for (const RolloutTrajectory& t : r.trajectories) {
    json tj{{"id", t.id}, {"predicted", t.predicted}, {"metrics", scores_to_json(t.metrics)}};
    if (t.judge_score) tj["judge_score"] = *t.judge_score;
    if (t.reward) tj["reward"] = *t.reward;
    if (t.advantage) tj["advantage"] = *t.advantage;
    trajs.push_back(std::move(tj));
  }
  j["trajectories"] = std::move(trajs);
}

void from_json(const json& j, RolloutRecord& r) {
  r = RolloutRecord{};
  r.scenario_id = j.at("scenario_id").get<std::string>();
  r.dialogue_id = j.value("dialogue_id", std::string{});
  r.turn = j.value("turn", 1);
  r.system_message = j.value("system_message", std::string{});
  r.user_message = j.value("user_message", std::string{});
  if (j.contains("reference")) r.reference = j.at("reference").get<std::vector<ActionInstance>>();
  if (j.contains("reference_ranges")) r.ranges = j.at("reference_ranges").get<ReferenceRange>();
  for (const json& tj : j.at("trajectories")) {
    RolloutTrajectory t;
    t.id = tj.at("id").is_string() ? tj.at("id").get<std::string>() : std::to_string(tj.at("id").get<long>());
    t.predicted = tj.at("predicted").get<TurnPrediction>();
    t.metrics = scores_from_json(tj.at("metrics"));
    if (tj.contains("judge_score") && !tj.at("judge_score").is_null()) t.judge_score = tj.at("judge_score").get<double>();
    if (tj.contains("reward") && !tj.at("reward").is_null()) t.reward = tj.at("reward").get<double>();
    if (tj.contains("advantage") && !tj.at("advantage").is_null()) t.advantage = tj.at("advantage").get<double>();
    r.trajectories.push_back(std::move(t));
  }
}

TrajectoryScores score_trajectory(const TurnPrediction& predicted, const std::vector<ActionInstance>& reference,
                                  const ReferenceRange& ranges, int turn) {
  const TurnMetricInput in{turn, predicted.actions, reference, &ranges};
  auto v = [](const MetricValue& m) { return m.defined ? m.value : 0.0; };
  return {v(action_consistency(in)), v(max_action_consistency(in)), v(proactive_timing(in)),
          v(fault_trigger_rate(in))};
}

std::vector<std::string> check_self_consistency(const RolloutRecord& r, double tol) {
  std::vector<std::string> out;
  if (!r.ranges) return out;
  for (const RolloutTrajectory& t : r.trajectories) {
    const TrajectoryScores s = score_trajectory(t.predicted, r.reference, *r.ranges, r.turn);
    const std::pair<const char*, std::pair<double, double>> fields[] = {
        {"rac", {t.metrics.rac, s.rac}},
        {"max_rac", {t.metrics.max_rac, s.max_rac}},
        {"ptr", {t.metrics.ptr, s.ptr}},
        {"ftr", {t.metrics.ftr, s.ftr}},
    };
    for (const auto& [name, vals] : fields) {
      if (std::fabs(vals.first - vals.second) > tol) {
        out.push_back(r.scenario_id + "/" + t.id + ": stored " + name + "=" + std::to_string(vals.first) +
                      " recomputed " + std::to_string(vals.second));
      }
    }
  }
  return out;
}

RulerGroup ruler_group(const RolloutRecord& r) {
  RulerGroup g;
  g.scenario_id = r.scenario_id;
  g.system_message = r.system_message;
  g.user_message = r.user_message;
  for (const RolloutTrajectory& t : r.trajectories) g.trajectories.push_back(json(t.predicted).dump());
  return g;
}

}  // namespace prosched
