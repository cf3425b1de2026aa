#include "prosched/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "prosched/action_state.hpp"
#include "text_util.hpp"

namespace prosched {

namespace {

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') {
    s.remove_prefix(1);
    if (s.empty() || s.front() == '-') return false;
  }
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

bool values_equal(const std::optional<std::string>& a, const std::optional<std::string>& b) {
  const std::string_view ta = detail::trim(a ? std::string_view(*a) : std::string_view());
  const std::string_view tb = detail::trim(b ? std::string_view(*b) : std::string_view());
  double na = 0, nb = 0;
  if (parse_number(ta, na) && parse_number(tb, nb)) return na == nb;
  return detail::ascii_lower(ta) == detail::ascii_lower(tb);
}

int param_match_score(std::span<const ParameterSpec> pred, std::span<const ParameterSpec> ref) {
  int matched = 0;
  for (const ParameterSpec& r : ref) {
    const bool hit = std::any_of(pred.begin(), pred.end(), [&](const ParameterSpec& p) {
      if (p.name != r.name || p.provided != r.provided) return false;
      return !r.provided || values_equal(p.value, r.value);
    });
    if (hit) ++matched;
  }
  return matched;
}

double prediction_alignment(const ActionInstance& pred, std::span<const ActionInstance> reference,
                            int* degenerate) {
  double best = 0.0;
  for (const ActionInstance& ref : reference) {
    if (ref.spec_name != pred.spec_name) continue;
    const std::size_t declared = ref.inputs_required.size() + ref.inputs_optional.size();
    if (declared == 0) {
      if (degenerate) ++*degenerate;
      continue;
    }
    const int hits = param_match_score(pred.inputs_required, ref.inputs_required) +
                     param_match_score(pred.inputs_optional, ref.inputs_optional);
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(declared));
  }
  return best;
}

MetricValue action_consistency(const TurnMetricInput& in, int* degenerate) {
  if (in.predicted.empty()) return MetricValue::undefined();
  double sum = 0.0;
  for (const ActionInstance& p : in.predicted) sum += prediction_alignment(p, in.reference, degenerate);
  return MetricValue::ratio(sum, static_cast<double>(in.predicted.size()));
}

MetricValue max_action_consistency(const TurnMetricInput& in) {
  if (in.predicted.empty()) return MetricValue::undefined();
  double best = 0.0;
  for (const ActionInstance& p : in.predicted) {
    best = std::max(best, prediction_alignment(p, in.reference));
  }
  return {true, best, best, 1.0};
}

DifferenceStats consistency_difference(double a, double d_a, double m, double d_m) {
  if (!(a > 0)) throw std::domain_error("undefined relative gap: A must be positive");
  DifferenceStats s;
  s.a = a;
  s.d_a = d_a;
  s.m = m;
  s.d_m = d_m;
  s.mu = (m - a) / a;
  const double t1 = d_m / a;
  const double t2 = m * d_a / (a * a);
  s.delta = std::sqrt(t1 * t1 + t2 * t2);
  return s;
}

MetricValue proactive_timing(const TurnMetricInput& in) {
  if (in.predicted.empty()) return MetricValue::undefined();
  int timely = 0;
  for (const ActionInstance& p : in.predicted) {
    const std::set<int>* r = in.ranges ? in.ranges->ready_turns(p.spec_name) : nullptr;
    if (r && !r->empty() && *r->rbegin() >= in.turn_index) ++timely;
  }
  return MetricValue::ratio(timely, static_cast<double>(in.predicted.size()));
}

MetricValue fault_trigger_rate(const TurnMetricInput& in, FtrMode mode) {
  int ready = 0;
  int faults = 0;
  for (const ActionInstance& p : in.predicted) {
    if (!is_ready(p.status)) continue;
    ++ready;
    const std::set<int>* r = in.ranges ? in.ranges->ready_turns(p.spec_name) : nullptr;
    const bool empty = !r || r->empty();
    if (mode == FtrMode::kNoRange ? empty : (empty || !r->count(in.turn_index))) ++faults;
  }
  return MetricValue::ratio(faults, ready);
}

MetricValue ready_action_rate(const TurnMetricInput& in) {
  const auto ready = std::count_if(in.predicted.begin(), in.predicted.end(),
                                   [](const ActionInstance& a) { return is_ready(a.status); });
  return MetricValue::ratio(static_cast<double>(ready), static_cast<double>(in.predicted.size()));
}

namespace {

std::set<std::string> word_tokens(const std::string& s) {
  std::set<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(std::move(cur));
  return out;
}

}  // namespace

double token_jaccard(const std::string& a, const std::string& b) {
  const auto ta = word_tokens(a);
  const auto tb = word_tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : ta) inter += tb.count(t);
  const std::size_t uni = ta.size() + tb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MetricValue information_consistency(const std::vector<std::string>& ref_q,
                                    const std::vector<std::string>& pred_q,
                                    const SimilarityFunction& sim) {
  if (ref_q.empty() || pred_q.empty()) return MetricValue::undefined();
  double sum = 0.0;
  for (const auto& r : ref_q) {
    for (const auto& p : pred_q) sum += sim(r, p);
  }
  return MetricValue::ratio(sum, static_cast<double>(ref_q.size() * pred_q.size()));
}

TransitionModel::TransitionModel(std::set<std::string> catalog_actions, double epsilon)
    : actions_(std::move(catalog_actions)), epsilon_(epsilon) {
  if (!(epsilon_ > 0)) throw std::invalid_argument("transition epsilon must be positive");
}

void TransitionModel::add(const std::string& prev, const std::string& next, long count) {
  if (count < 0) throw std::invalid_argument("negative transition count");
  counts_[{prev, next}] += count;
  // Only in-catalog successors enter the normalizer.
  if (actions_.count(next)) row_totals_[prev] += count;
}

void TransitionModel::add_dialogue(const Dialogue& d) {
  for (std::size_t i = 1; i < d.turns.size(); ++i) {
    for (const ActionInstance& prev : d.turns[i - 1].actions) {
      for (const ActionInstance& next : d.turns[i].actions) add(prev.spec_name, next.spec_name);
    }
  }
}

void TransitionModel::add_workflows(const std::map<std::string, std::vector<std::string>>& workflows) {
  for (const auto& [_, seq] : workflows) {
    for (std::size_t i = 1; i < seq.size(); ++i) add(seq[i - 1], seq[i]);
  }
}

long TransitionModel::count(const std::string& prev, const std::string& next) const {
  auto it = counts_.find({prev, next});
  return it == counts_.end() ? 0 : it->second;
}

double TransitionModel::probability(const std::string& prev, const std::string& next) const {
  if (actions_.empty()) throw std::invalid_argument("transition model has an empty catalog");
  if (!actions_.count(next)) throw std::invalid_argument("action not in catalog: " + next);
  auto it = row_totals_.find(prev);
  const double total = it == row_totals_.end() ? 0.0 : static_cast<double>(it->second);
  const double den = total + static_cast<double>(actions_.size()) * epsilon_;
  return (static_cast<double>(count(prev, next)) + epsilon_) / den;
}

double transition_probability(const TransitionModel& m, const std::string& prev,
                              const std::string& next) {
  return m.probability(prev, next);
}

MetricValue action_dependency(std::span<const ActionInstance> prev_preds,
                              std::span<const ActionInstance> cur_preds, const TransitionModel& m) {
  if (cur_preds.empty()) return MetricValue::undefined();
  double sum = 0.0;
  for (const ActionInstance& cur : cur_preds) {
    if (!m.catalog_actions().count(cur.spec_name)) continue;
    for (const ActionInstance& prev : prev_preds) sum += m.probability(prev.spec_name, cur.spec_name);
  }
  return MetricValue::ratio(sum, static_cast<double>(cur_preds.size()));
}

ObservationRates observation_rates(const TurnMetricInput& in) {
  ObservationRates r;
  if (in.predicted.empty()) return r;
  std::set<std::string> ref_names;
  for (const ActionInstance& a : in.reference) ref_names.insert(a.spec_name);
  int atr = 0, false_trig = 0, frr = 0;
  for (const ActionInstance& p : in.predicted) {
    const bool present = ref_names.count(p.spec_name) > 0;
    const bool triggered = p.status == TriggerStatus::kTriggered;
    if (triggered && present) ++atr;
    if (triggered && !present) ++false_trig;
    if (is_ready(p.status) && !present) ++frr;
  }
  const double n = static_cast<double>(in.predicted.size());
  r.atr = MetricValue::ratio(atr, n);
  r.false_triggered = MetricValue::ratio(false_trig, n);
  r.frr = MetricValue::ratio(frr, n);
  return r;
}

std::vector<TurnResult> evaluate_dialogue(const EvalDialogue& d, const EvalOptions& opt) {
  const ReferenceRange ranges = compute_reference_ranges(d.reference);
  static const std::vector<ActionInstance> kNone;
  std::vector<TurnResult> out;
  for (std::size_t i = 0; i < d.reference.turns.size(); ++i) {
    const TurnAnnotation& ref = d.reference.turns[i];
    const TurnPrediction& pred = i < d.predictions.size() ? d.predictions[i] : TurnPrediction{};
    TurnMetricInput in{ref.turn.index, pred.actions, ref.actions, &ranges};
    TurnResult tr;
    tr.dialogue_id = d.reference.id;
    tr.turn = ref.turn.index;
    auto& m = tr.metrics;
    m["AC"] = action_consistency(in, &tr.degenerate_references);
    m["MaxAC"] = max_action_consistency(in);
    m["PT"] = proactive_timing(in);
    m["FTR"] = fault_trigger_rate(in, opt.ftr_mode);
    m["RAR"] = ready_action_rate(in);
    m["IC"] = information_consistency(ref.questions, pred.questions, opt.similarity);
    if (opt.transitions) {
      const auto& prev = (i > 0 && i - 1 < d.predictions.size()) ? d.predictions[i - 1].actions : kNone;
      m["AD"] = action_dependency(prev, pred.actions, *opt.transitions);
    } else {
      m["AD"] = MetricValue::undefined();
    }
    const ObservationRates obs = observation_rates(in);
    m["ATR"] = obs.atr;
    m["FalseTriggered"] = obs.false_triggered;
    m["FRR"] = obs.frr;
    out.push_back(std::move(tr));
  }
  return out;
}

namespace {

struct Acc {
  double sum = 0.0;
  int n = 0;
};

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

DatasetReport aggregate_report(const std::vector<TurnResult>& per_turn) {
  DatasetReport rep;
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, Acc>> by_dialogue;
  std::map<std::string, Acc> micro;
  std::map<std::string, int> undefined;
  for (const TurnResult& tr : per_turn) {
    if (!by_dialogue.count(tr.dialogue_id)) order.push_back(tr.dialogue_id);
    auto& dacc = by_dialogue[tr.dialogue_id];
    rep.degenerate_references += tr.degenerate_references;
    for (const char* name : kTurnMetrics) {
      auto it = tr.metrics.find(name);
      if (it == tr.metrics.end() || !it->second.defined) {
        ++undefined[name];
        continue;
      }
      micro[name].sum += it->second.value;
      ++micro[name].n;
      dacc[name].sum += it->second.value;
      ++dacc[name].n;
    }
  }
  for (const auto& id : order) {
    std::map<std::string, double> means;
    for (const auto& [name, acc] : by_dialogue[id]) {
      if (acc.n > 0) means[name] = acc.sum / acc.n;
    }
    auto ac = means.find("AC");
    auto mx = means.find("MaxAC");
    if (ac != means.end() && mx != means.end() && ac->second > 0) {
      means["Difference"] = (mx->second - ac->second) / ac->second;
    }
    rep.per_dialogue.emplace_back(id, std::move(means));
  }
  for (const char* name : kTurnMetrics) {
    MetricSummary s;
    s.defined = micro[name].n;
    s.undefined = undefined[name];
    if (s.defined > 0) s.mean = micro[name].sum / s.defined;
    std::vector<double> dvals;
    for (const auto& [id, means] : rep.per_dialogue) {
      auto it = means.find(name);
      if (it != means.end()) dvals.push_back(it->second);
    }
    s.dialogues = static_cast<int>(dvals.size());
    if (!dvals.empty()) {
      double sum = 0.0;
      for (double v : dvals) sum += v;
      s.macro_mean = sum / static_cast<double>(dvals.size());
      s.macro_std = sample_std(dvals);
    }
    rep.metrics[name] = s;
  }
  const MetricSummary& ac = rep.metrics["AC"];
  const MetricSummary& mx = rep.metrics["MaxAC"];
  if (ac.defined > 0 && mx.defined > 0 && ac.mean > 0) {
    rep.difference = consistency_difference(ac.mean, ac.macro_std, mx.mean, mx.macro_std);
  }
  return rep;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const DatasetReport& r) {
  std::ostringstream os;
  os << "scope";
  for (const char* c : kReportColumns) os << ',' << c;
  os << '\n';
  for (const auto& [id, means] : r.per_dialogue) {
    os << id;
    for (const char* c : kReportColumns) {
      auto it = means.find(c);
      os << ',' << (it == means.end() ? std::string() : fmt(it->second));
    }
    os << '\n';
  }
  os << "ALL";
  for (const char* c : kReportColumns) {
    os << ',';
    if (std::string_view(c) == "Difference") {
      if (r.difference) os << fmt(r.difference->mu);
      continue;
    }
    auto it = r.metrics.find(c);
    if (it != r.metrics.end() && it->second.defined > 0) os << fmt(it->second.mean);
  }
  os << '\n';
  return os.str();
}

}  // namespace prosched
