#include "prosched/alignment.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "prosched/action_state.hpp"

namespace prosched {

namespace {

const ReferenceRange* find_ranges(const AnnotationSet& a, const std::string& id) {
  auto it = a.find(id);
  return it == a.end() ? nullptr : &it->second;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = sd = 0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace

double ec_score(const ObservedTrigger& g, const ReferenceRange& ranges, int sigma) {
  const std::set<int>* r = ranges.ready_turns(g.action);
  if (!r || r->empty()) return 0.0;
  return *r->begin() + sigma <= g.turn ? 1.0 : 0.0;
}

DatasetEc dataset_ec(const std::vector<ObservedTrigger>& triggers, const AnnotationSet& annotations,
                     int sigma) {
  if (triggers.empty()) throw std::invalid_argument("no observed triggers");
  DatasetEc out;
  std::vector<double> scores;
  std::map<std::string, std::pair<double, int>> by_dialogue;
  for (const ObservedTrigger& g : triggers) {
    const ReferenceRange* r = find_ranges(annotations, g.dialogue_id);
    const double s = r ? ec_score(g, *r, sigma) : 0.0;
    scores.push_back(s);
    if (s == 1.0) ++out.satisfied;
    auto& acc = by_dialogue[g.dialogue_id];
    acc.first += s;
    ++acc.second;
  }
  out.total = static_cast<int>(triggers.size());
  mean_std(scores, out.mean, out.std);
  std::vector<double> dvals;
  for (const auto& [id, acc] : by_dialogue) {
    out.per_dialogue[id] = acc.first / acc.second;
    dvals.push_back(out.per_dialogue[id]);
  }
  mean_std(dvals, out.dialogue_mean, out.dialogue_std);
  return out;
}

FilterResult filter_dialogues(const std::map<std::string, double>& per_dialogue, double threshold) {
  if (threshold < 0 || threshold > 1) throw std::invalid_argument("threshold must lie in [0, 1]");
  FilterResult f;
  for (const auto& [id, score] : per_dialogue) (score > threshold ? f.kept : f.dropped).push_back(id);
  return f;
}

std::vector<SweepRow> ec_sweep(const std::vector<ObservedTrigger>& triggers,
                               const AnnotationSet& annotations, const std::vector<int>& sigmas,
                               double threshold) {
  std::vector<SweepRow> rows;
  for (int sigma : sigmas) {
    const DatasetEc ec = dataset_ec(triggers, annotations, sigma);
    const FilterResult f = filter_dialogues(ec.per_dialogue, threshold);
    SweepRow r;
    r.sigma = sigma;
    r.satisfied = ec.satisfied;
    r.satisfied_pct = 100.0 * ec.satisfied / ec.total;
    r.dialogue_mean = ec.dialogue_mean;
    r.dialogue_std = ec.dialogue_std;
    r.above_threshold_pct = ec.per_dialogue.empty()
                                ? 0.0
                                : 100.0 * static_cast<double>(f.kept.size()) /
                                      static_cast<double>(ec.per_dialogue.size());
    rows.push_back(r);
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "sigma,actions_ec1,actions_ec1_pct,dataset_score_mean,dataset_score_std,dialogues_above_threshold_pct\n";
  char buf[160];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.2f,%.4f,%.4f,%.2f\n", r.sigma, r.satisfied, r.satisfied_pct,
                  r.dialogue_mean, r.dialogue_std, r.above_threshold_pct);
    os << buf;
  }
  return os.str();
}

QualityStats annotation_quality_stats(const AnnotationSet& annotations,
                                      const std::vector<ObservedTrigger>& triggers,
                                      const std::string& critical_action, int sigma,
                                      double threshold) {
  QualityStats q;
  std::map<std::string, std::set<std::string>> triggered;  // dialogue -> actions
  for (const ObservedTrigger& g : triggers) triggered[g.dialogue_id].insert(g.action);

  int passing = 0, annotated = 0, gap_sum = 0, critical_miss = 0;
  for (const ObservedTrigger& g : triggers) {
    const ReferenceRange* r = find_ranges(annotations, g.dialogue_id);
    if (r && r->occurrences.count(g.action)) ++annotated;
    else ++q.missing_annotations;
    const double ec = r ? ec_score(g, *r, sigma) : 0.0;
    if (ec == 1.0) {
      ++passing;
      gap_sum += g.turn - *r->ready_turns(g.action)->begin();
    }
    if (g.action == critical_action) {
      ++q.critical_triggers;
      if (ec != 1.0) ++critical_miss;
    }
  }
  if (!triggers.empty()) {
    const double n = static_cast<double>(triggers.size());
    q.overall_coverage = passing / n;
    q.annotation_coverage = annotated / n;
    const DatasetEc ec = dataset_ec(triggers, annotations, sigma);
    q.score_consistency = ec.dialogue_std;
    q.high_quality_dialogues = static_cast<int>(filter_dialogues(ec.per_dialogue, threshold).kept.size());
  }
  if (passing > 0) q.turn_gap_mean = static_cast<double>(gap_sum) / passing;
  if (q.critical_triggers > 0) q.critical_miss_rate = static_cast<double>(critical_miss) / q.critical_triggers;

  for (const auto& [id, ranges] : annotations) {
    auto it = triggered.find(id);
    for (const auto& [action, turns] : ranges.per_action) {
      if (turns.empty()) continue;
      if (it != triggered.end() && it->second.count(action)) ++q.matched_ranges;
      else ++q.phantom_ranges;
    }
  }
  const int all_ranges = q.phantom_ranges + q.matched_ranges;
  if (all_ranges > 0) q.phantom_noise_rate = static_cast<double>(q.phantom_ranges) / all_ranges;
  return q;
}

std::vector<ObservedTrigger> collect_triggers(const std::vector<Dialogue>& dialogues) {
  std::vector<ObservedTrigger> out;
  for (const Dialogue& d : dialogues) {
    if (!d.observed_triggers) continue;
    for (const TriggerRef& t : *d.observed_triggers) out.push_back({d.id, t.turn, t.action});
  }
  return out;
}

AnnotationSet collect_ranges(const std::vector<Dialogue>& dialogues) {
  AnnotationSet out;
  for (const Dialogue& d : dialogues) out[d.id] = compute_reference_ranges(d);
  return out;
}

}  // namespace prosched
