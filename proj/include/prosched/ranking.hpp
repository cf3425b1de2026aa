#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace prosched {

struct ModelRow {
  std::string model_id;
  double ac = 0, max_ac = 0, difference = 0, pt = 0, ftr = 0, rar = 0;
};

struct PriResult {
  std::string model_id;
  double ci = 0;
  double ti = 0;
  double pri = 0;
  std::map<std::string, double> normalized;
};

inline constexpr double kPriFloor = 0.001;

std::vector<double> minmax_normalize(const std::vector<double>& values);

/// Harmonic mean of the two indices after flooring each at kPriFloor.
double pri_from_indices(double ci, double ti);

/// Throws std::invalid_argument naming the first row with a non-finite field.
std::vector<PriResult> compute_pri(const std::vector<ModelRow>& group);

struct RankedEntry {
  int rank = 0;  // 1-based
  PriResult result;
  bool tied = false;  // PRI equal (within 1e-12) to a neighbour
  std::string marker;  // "(1)".."(k)" for the top k, else empty
};

std::vector<RankedEntry> rank_group(std::vector<PriResult> results, int top_k = 4);

/// Reads a "model_id,AC,MaxAC,Difference,PT,FTR,RAR" table; extra columns
/// are ignored, header names are matched case-insensitively.
std::vector<ModelRow> read_model_rows_csv(const std::string& text);
std::string ranked_to_csv(const std::vector<RankedEntry>& ranked);

struct RunSeries {
  std::string metric_id;
  std::vector<std::pair<int, double>> steps;
};

struct RunConsistency {
  std::map<std::string, double> c_final;
  std::map<std::string, double> c_trajectory;
  std::optional<double> c_combined;
  std::vector<std::string> warnings;
};

/// Throws std::invalid_argument when a metric is missing from one run or a
/// series has non-increasing steps.
RunConsistency run_consistency(const std::vector<RunSeries>& run1, const std::vector<RunSeries>& run2);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

double avg_metric_gradient(const RunSeries& s);

}  // namespace prosched
