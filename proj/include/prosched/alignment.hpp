#pragma once

// Validation of oracle annotations against observed triggers.

#include <map>
#include <string>
#include <vector>

#include "prosched/types.hpp"

namespace prosched {

struct ObservedTrigger {
  std::string dialogue_id;
  int turn = 1;
  std::string action;
};

struct EcConfig {
  int sigma = 0;
  double dialogue_pass_threshold = 0.8;
};

using AnnotationSet = std::map<std::string, ReferenceRange>;

/// 1.0 iff the action's earliest ready turn plus sigma is no later than the trigger turn.
double ec_score(const ObservedTrigger& g, const ReferenceRange& ranges, int sigma);

struct DatasetEc {
  double mean = 0;  // over triggers
  double std = 0;   // population std over triggers
  int satisfied = 0;
  int total = 0;
  std::map<std::string, double> per_dialogue;  // mean EC of each dialogue's triggers
  double dialogue_mean = 0;
  double dialogue_std = 0;  // population std over dialogues
};

/// Throws std::invalid_argument on an empty trigger list. A trigger whose
/// dialogue has no annotations scores 0.
DatasetEc dataset_ec(const std::vector<ObservedTrigger>& triggers, const AnnotationSet& annotations,
                     int sigma);

struct FilterResult {
  std::vector<std::string> kept;
  std::vector<std::string> dropped;
};

/// Keeps dialogues whose score is strictly above threshold.
FilterResult filter_dialogues(const std::map<std::string, double>& per_dialogue, double threshold);

struct SweepRow {
  int sigma = 0;
  int satisfied = 0;       // triggers with EC = 1, dataset granularity
  double satisfied_pct = 0;
  double dialogue_mean = 0;
  double dialogue_std = 0;
  double above_threshold_pct = 0;  // share of dialogues with score > threshold
};

std::vector<SweepRow> ec_sweep(const std::vector<ObservedTrigger>& triggers,
                               const AnnotationSet& annotations, const std::vector<int>& sigmas,
                               double threshold = 0.8);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

struct QualityStats {
  double overall_coverage = 0;
  double annotation_coverage = 0;
  double score_consistency = 0;
  double turn_gap_mean = 0;
  double phantom_noise_rate = 0;
  double critical_miss_rate = 0;

  int phantom_ranges = 0;
  int matched_ranges = 0;
  int missing_annotations = 0;
  int high_quality_dialogues = 0;
  int critical_triggers = 0;
};

QualityStats annotation_quality_stats(const AnnotationSet& annotations,
                                      const std::vector<ObservedTrigger>& triggers,
                                      const std::string& critical_action, int sigma,
                                      double threshold = 0.8);

/// Observed triggers recorded on the dialogues themselves.
std::vector<ObservedTrigger> collect_triggers(const std::vector<Dialogue>& dialogues);
AnnotationSet collect_ranges(const std::vector<Dialogue>& dialogues);

}  // namespace prosched
