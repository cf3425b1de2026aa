#include "prosched/ruler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace prosched {

using nlohmann::json;

namespace {

constexpr const char* kPreamble =
    "All of the trajectories below have been given the same goal. Your job is to consider each "
    "of them and assign a score between 0 and 1 based on your best judgment of how well the "
    "agent achieves its goal.\n";

constexpr const char* kStandardsHead[] = {
    "- A trajectory that achieves its goal should always receive a significantly higher score "
    "than one that does not.",
    "- A trajectory that achieves its goal more efficiently (e.g., avoiding unproductive "
    "detours) should receive a higher score.",
    "- If one trajectory is only slightly better than another, the score difference should be "
    "small; if significantly better, the difference should be large.",
};

constexpr const char* kStandardsTail =
    "- Partial credit may be given for trajectories that make progress toward the goal but do "
    "not complete it.";

std::string quoted(const std::string& s) { return json(s).dump(); }

}  // namespace

std::string ruler_system_message(const std::vector<std::string>& custom_rules) {
  std::ostringstream os;
  os << kPreamble << "Grading standards:\n";
  for (const char* line : kStandardsHead) os << line << '\n';
  for (const std::string& rule : custom_rules) os << "- " << rule << '\n';
  os << kStandardsTail << '\n';
  return os.str();
}

std::string ruler_user_message(const RulerGroup& group) {
  std::ostringstream os;
  os << "<context>\n[\n";
  os << "  {\"content\": " << quoted(group.system_message) << ", \"role\": \"system\"},\n";
  os << "  {\"content\": " << quoted(group.user_message) << ", \"role\": \"user\"}\n";
  os << "]\n</context>\nTrajectories:\n";
  for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
    os << "<trajectory id=\"" << i + 1 << "\">\n[\n";
    os << "  {\"role\": \"assistant\", \"content\": " << quoted(group.trajectories[i]) << "}\n";
    os << "]\n</trajectory>\n";
  }
  return os.str();
}

RulerPrompt build_ruler_prompt(const RulerGroup& group, const std::vector<std::string>& custom_rules) {
  if (group.trajectories.empty()) throw std::invalid_argument("judge group has no trajectories");
  return {ruler_system_message(custom_rules), ruler_user_message(group)};
}

std::string RulerPrompt::to_text() const {
  return "<system message>\n" + system + "</system message>\n<user message>\n" + user +
         "</user message>\n";
}

std::string_view to_string(RulerErrorKind k) {
  switch (k) {
    case RulerErrorKind::kMalformed: return "malformed";
    case RulerErrorKind::kMissingId: return "missing_id";
    case RulerErrorKind::kDuplicateId: return "duplicate_id";
    case RulerErrorKind::kUnknownId: return "unknown_id";
    case RulerErrorKind::kOutOfRange: return "out_of_range";
  }
  return "malformed";
}

namespace {

json extract_object(const std::string& response) {
  const auto first = response.find('{');
  const auto last = response.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first) {
    throw RulerParseError(RulerErrorKind::kMalformed, "no JSON object in judge response");
  }
  try {
    return json::parse(response.substr(first, last - first + 1));
  } catch (const json::parse_error& e) {
    throw RulerParseError(RulerErrorKind::kMalformed, std::string("judge response: ") + e.what());
  }
}

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw RulerParseError(RulerErrorKind::kMalformed, "trajectory_id must be a string or integer");
}

}  // namespace

std::vector<RulerScore> parse_ruler_scores(const std::string& response,
                                           const std::set<std::string>& expected_ids) {
  const json doc = extract_object(response);
  if (!doc.is_object() || !doc.contains("scores") || !doc.at("scores").is_array()) {
    throw RulerParseError(RulerErrorKind::kMalformed, "judge response lacks a scores array");
  }
  std::vector<RulerScore> out;
  std::set<std::string> seen;
  for (const json& e : doc.at("scores")) {
    if (!e.is_object() || !e.contains("trajectory_id") || !e.contains("score")) {
      throw RulerParseError(RulerErrorKind::kMalformed, "score entry lacks trajectory_id or score");
    }
    RulerScore s;
    s.trajectory_id = id_string(e.at("trajectory_id"));
    if (!e.at("score").is_number()) {
      throw RulerParseError(RulerErrorKind::kMalformed, "score for " + s.trajectory_id + " is not a number");
    }
    s.score = e.at("score").get<double>();
    if (e.contains("explanation") && e.at("explanation").is_string()) {
      s.explanation = e.at("explanation").get<std::string>();
    }
    if (!expected_ids.count(s.trajectory_id)) {
      throw RulerParseError(RulerErrorKind::kUnknownId, "unexpected trajectory_id " + s.trajectory_id);
    }
    if (!seen.insert(s.trajectory_id).second) {
      throw RulerParseError(RulerErrorKind::kDuplicateId, "duplicate trajectory_id " + s.trajectory_id);
    }
    if (!std::isfinite(s.score) || s.score < 0.0 || s.score > 1.0) {
      throw RulerParseError(RulerErrorKind::kOutOfRange, "score for " + s.trajectory_id + " outside [0, 1]");
    }
    out.push_back(std::move(s));
  }
  for (const auto& id : expected_ids) {
    if (!seen.count(id)) throw RulerParseError(RulerErrorKind::kMissingId, "missing trajectory_id " + id);
  }
  return out;
}

int parse_pr_rating(const std::string& response) {
  json doc;
  try {
    doc = extract_object(response);
  } catch (const RulerParseError& e) {
    throw std::invalid_argument(e.what());
  }
  if (!doc.contains("rating")) throw std::invalid_argument("rating field missing");
  const json& r = doc.at("rating");
  long long v = 0;
  if (r.is_number_integer()) {
    v = r.get<long long>();
  } else if (r.is_number_float() && std::floor(r.get<double>()) == r.get<double>()) {
    v = static_cast<long long>(r.get<double>());
  } else {
    throw std::invalid_argument("rating is not an integer");
  }
  if (v == -1 || (v >= 1 && v <= 5)) return static_cast<int>(v);
  throw std::invalid_argument("rating " + std::to_string(v) + " not in {-1, 1..5}");
}

JudgeOutcome judge_group(const RulerGroup& group, const std::vector<std::string>& custom_rules,
                         const JudgeTransport& transport, const JudgeOptions& opt) {
  JudgeOutcome out;
  out.scenario_id = group.scenario_id;
  const RulerPrompt prompt = build_ruler_prompt(group, custom_rules);
  std::set<std::string> ids;
  for (std::size_t i = 1; i <= group.trajectories.size(); ++i) ids.insert(std::to_string(i));
  auto delay = opt.backoff_base;
  for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
    if (attempt > 0) {
      if (opt.sleep) opt.sleep(delay);
      else std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * opt.backoff_factor));
    }
    ++out.attempts;
    try {
      auto scores = parse_ruler_scores(transport(prompt), ids);
      std::sort(scores.begin(), scores.end(), [](const RulerScore& a, const RulerScore& b) {
        return std::stoll(a.trajectory_id) < std::stoll(b.trajectory_id);
      });
      out.scores = std::move(scores);
      out.ok = true;
      return out;
    } catch (const RulerParseError& e) {
      out.failures.push_back(std::string(to_string(e.kind)) + ": " + e.what());
    } catch (const std::exception& e) {
      out.failures.push_back(std::string("transport: ") + e.what());
    }
  }
  return out;
}

std::vector<JudgeOutcome> judge_groups(const std::vector<RulerGroup>& groups,
                                       const std::vector<std::string>& custom_rules,
                                       const JudgeTransport& transport, const JudgeOptions& opt) {
  std::vector<JudgeOutcome> out(groups.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < groups.size(); i = next++) {
      try {
        out[i] = judge_group(groups[i], custom_rules, transport, opt);
      } catch (const std::exception& e) {
        out[i].scenario_id = groups[i].scenario_id;
        out[i].failures.push_back(e.what());
      }
    }
  };
  const std::size_t n =
      std::min<std::size_t>(groups.size(), static_cast<std::size_t>(std::max(1, opt.max_concurrent)));
  std::vector<std::jthread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  return out;
}

}  // namespace prosched
