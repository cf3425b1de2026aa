#pragma once

// Per-turn proactiveness metrics and their dataset aggregation.
//
// Every rate is returned as a MetricValue carrying its numerator and
// denominator. An empty denominator makes the value undefined; undefined
// turns are excluded from aggregation instead of being counted as zero.

#include <array>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prosched/catalog.hpp"
#include "prosched/types.hpp"

namespace prosched {

struct MetricValue {
  bool defined = false;
  double value = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;

  static MetricValue undefined() { return {}; }
  static MetricValue ratio(double num, double den) {
    if (den <= 0) return {false, 0.0, num, den};
    return {true, num / den, num, den};
  }
};

struct TurnMetricInput {
  int turn_index = 1;
  std::span<const ActionInstance> predicted;
  std::span<const ActionInstance> reference;
  const ReferenceRange* ranges = nullptr;
};

/// Canonical equality for parameter values: trimmed, ASCII case-folded,
/// numeric when both sides parse as numbers.
bool values_equal(const std::optional<std::string>& a, const std::optional<std::string>& b);

int param_match_score(std::span<const ParameterSpec> pred, std::span<const ParameterSpec> ref);

/// Alignment of one prediction against its best same-name reference.
/// degenerate is incremented for each candidate reference with no parameters.
double prediction_alignment(const ActionInstance& pred, std::span<const ActionInstance> reference,
                            int* degenerate = nullptr);

MetricValue action_consistency(const TurnMetricInput& in, int* degenerate = nullptr);
MetricValue max_action_consistency(const TurnMetricInput& in);

struct DifferenceStats {
  double mu = 0.0;
  double delta = 0.0;
  double a = 0.0, d_a = 0.0, m = 0.0, d_m = 0.0;
};

/// Relative gap (M - A) / A with first-order error propagation.
/// Throws std::domain_error when A <= 0.
DifferenceStats consistency_difference(double a, double d_a, double m, double d_m);

MetricValue proactive_timing(const TurnMetricInput& in);

enum class FtrMode {
  kNoRange,      // the action never becomes ready anywhere in the dialogue
  kOutsideTurn,  // the current turn is not one of the action's ready turns
};

MetricValue fault_trigger_rate(const TurnMetricInput& in, FtrMode mode = FtrMode::kNoRange);
MetricValue ready_action_rate(const TurnMetricInput& in);

using SimilarityFunction = std::function<double(const std::string&, const std::string&)>;

/// Jaccard overlap of case-folded alphanumeric tokens. Two token-less
/// strings have similarity 1.
double token_jaccard(const std::string& a, const std::string& b);

MetricValue information_consistency(const std::vector<std::string>& ref_q,
                                    const std::vector<std::string>& pred_q,
                                    const SimilarityFunction& sim = token_jaccard);

class TransitionModel {
 public:
  static constexpr double kDefaultEpsilon = 1e-7;

  explicit TransitionModel(std::set<std::string> catalog_actions,
                           double epsilon = kDefaultEpsilon);

  void add(const std::string& prev, const std::string& next, long count = 1);
  /// Counts every (previous-turn action, current-turn action) pair.
  void add_dialogue(const Dialogue& d);
  /// Counts consecutive steps of each workflow.
  void add_workflows(const std::map<std::string, std::vector<std::string>>& workflows);

  long count(const std::string& prev, const std::string& next) const;
  double epsilon() const { return epsilon_; }
  const std::set<std::string>& catalog_actions() const { return actions_; }

  /// Laplace-smoothed P(next | prev). Throws std::invalid_argument when the
  /// catalog is empty or next is not in it.
  double probability(const std::string& prev, const std::string& next) const;

 private:
  std::set<std::string> actions_;
  double epsilon_;
  std::map<std::pair<std::string, std::string>, long> counts_;
  std::map<std::string, long> row_totals_;
};

double transition_probability(const TransitionModel& m, const std::string& prev,
                              const std::string& next);

MetricValue action_dependency(std::span<const ActionInstance> prev_preds,
                              std::span<const ActionInstance> cur_preds, const TransitionModel& m);

struct ObservationRates {
  MetricValue atr;
  MetricValue false_triggered;
  MetricValue frr;
};

ObservationRates observation_rates(const TurnMetricInput& in);

// Column order of every tabular report.
inline constexpr std::array<const char*, 11> kReportColumns = {
    "AC", "MaxAC", "Difference", "PT", "FTR", "RAR", "IC", "AD", "ATR", "FalseTriggered", "FRR"};

// Metrics computed per turn; Difference is derived at aggregation time.
inline constexpr std::array<const char*, 10> kTurnMetrics = {
    "AC", "MaxAC", "PT", "FTR", "RAR", "IC", "AD", "ATR", "FalseTriggered", "FRR"};

using TurnMetrics = std::map<std::string, MetricValue>;

struct EvalOptions {
  FtrMode ftr_mode = FtrMode::kNoRange;
  SimilarityFunction similarity = token_jaccard;
  const TransitionModel* transitions = nullptr;  // AD is undefined without one
};

struct TurnResult {
  std::string dialogue_id;
  int turn = 1;
  TurnMetrics metrics;
  int degenerate_references = 0;
};

std::vector<TurnResult> evaluate_dialogue(const EvalDialogue& d, const EvalOptions& opt);

struct MetricSummary {
  double mean = 0.0;  // micro average over defined turns
  int defined = 0;
  int undefined = 0;
  double macro_mean = 0.0;  // over dialogues with at least one defined turn
  double macro_std = 0.0;   // sample standard deviation across dialogues
  int dialogues = 0;
};

struct DatasetReport {
  std::map<std::string, MetricSummary> metrics;
  std::optional<DifferenceStats> difference;
  // Per-dialogue micro means; undefined metrics are absent.
  std::vector<std::pair<std::string, std::map<std::string, double>>> per_dialogue;
  int degenerate_references = 0;
};

/// Folds per-turn results in input order. Dialogue grouping follows first
/// appearance of each dialogue id.
DatasetReport aggregate_report(const std::vector<TurnResult>& per_turn);

std::string report_to_csv(const DatasetReport& r);

}  // namespace prosched
