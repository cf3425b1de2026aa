#pragma once

// Judge prompt construction and response parsing for group-relative
// trajectory scoring, plus a retrying client over a caller-supplied transport.

#include <chrono>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace prosched {

struct RulerGroup {
  std::string scenario_id;
  std::string system_message;  // the rollout's system message
  std::string user_message;    // the rollout's user message
  std::vector<std::string> trajectories;  // assistant content per rollout, ids "1".."K"
};

struct RulerPrompt {
  std::string system;
  std::string user;

  /// Both messages wrapped in <system message>/<user message> tags.
  std::string to_text() const;
};

std::string ruler_system_message(const std::vector<std::string>& custom_rules);
std::string ruler_user_message(const RulerGroup& group);
RulerPrompt build_ruler_prompt(const RulerGroup& group, const std::vector<std::string>& custom_rules);

enum class RulerErrorKind { kMalformed, kMissingId, kDuplicateId, kUnknownId, kOutOfRange };
std::string_view to_string(RulerErrorKind k);

struct RulerParseError : std::runtime_error {
  RulerParseError(RulerErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  RulerErrorKind kind;
};

struct RulerScore {
  std::string trajectory_id;
  std::string explanation;
  double score = 0;
};

/// Parses the first '{' .. last '}' span as {"scores": [...]}. Result order
/// follows the response.
std::vector<RulerScore> parse_ruler_scores(const std::string& response,
                                           const std::set<std::string>& expected_ids);

/// Extracts "rating" from a judge reply; valid values are -1 and 1..5.
/// Throws std::invalid_argument otherwise.
int parse_pr_rating(const std::string& response);

using JudgeTransport = std::function<std::string(const RulerPrompt&)>;

struct JudgeOptions {
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{200};
  double backoff_factor = 2.0;
  int max_concurrent = 4;
  // Injected so tests can observe backoff without sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct JudgeOutcome {
  std::string scenario_id;
  std::vector<RulerScore> scores;  // ordered by trajectory id "1".."K"
  int attempts = 0;
  std::vector<std::string> failures;  // one entry per failed attempt
  bool ok = false;
};

JudgeOutcome judge_group(const RulerGroup& group, const std::vector<std::string>& custom_rules,
                         const JudgeTransport& transport, const JudgeOptions& opt);

/// Scores groups with at most opt.max_concurrent transport calls in flight.
/// Results are indexed like the input regardless of completion order.
std::vector<JudgeOutcome> judge_groups(const std::vector<RulerGroup>& groups,
                                       const std::vector<std::string>& custom_rules,
                                       const JudgeTransport& transport, const JudgeOptions& opt);

}  // namespace prosched
