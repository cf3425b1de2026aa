#include "prosched/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "prosched/action_state.hpp"
#include "prosched/alignment.hpp"
#include "prosched/annotator.hpp"
#include "prosched/catalog.hpp"
#include "prosched/config.hpp"
#include "prosched/grpo.hpp"
#include "prosched/metrics.hpp"
#include "prosched/orchsim.hpp"
#include "prosched/ranking.hpp"
#include "prosched/records.hpp"
#include "prosched/rewards.hpp"
#include "prosched/rollout.hpp"
#include "prosched/ruler.hpp"
#include "prosched/synth.hpp"

namespace fs = std::filesystem;

namespace prosched {

using nlohmann::json;

namespace {

// Thrown for input that parses but fails validation.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::vector<std::string> config_paths;
  std::vector<std::string> sets;
  long seed = 0;
  double lambda_max = 0;
  std::string reward_rule;
  int sigma = 0;
  bool without_future = false;
  int max_concurrent = 0;
  bool replicate = false;
  int start_index = 0;
  int max_dialogues = 0;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_lambda_max = nullptr;
  CLI::Option* o_reward_rule = nullptr;
  CLI::Option* o_sigma = nullptr;
  CLI::Option* o_max_concurrent = nullptr;
  CLI::Option* o_start_index = nullptr;
  CLI::Option* o_max_dialogues = nullptr;
};

RunConfig build_config(const GlobalOptions& g) {
  std::vector<std::pair<std::string, std::string>> ov;
  for (const std::string& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw RunConfigError(ConfigErrorKind::kParse, "--set expects key=value, got '" + s + "'");
    }
    ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (g.o_seed->count()) ov.emplace_back("run.seed", std::to_string(g.seed));
  if (g.o_lambda_max->count()) {
    ov.emplace_back("llm.upper_limit_weight_for_scheduled_ruler", g.o_lambda_max->as<std::string>());
  }
  if (g.o_reward_rule->count()) ov.emplace_back("llm.trajectory_reward_rule", g.reward_rule);
  if (g.o_sigma->count()) ov.emplace_back("alignment.sigma", std::to_string(g.sigma));
  if (g.without_future) ov.emplace_back("run.with_future", "false");
  if (g.o_max_concurrent->count()) {
    ov.emplace_back("llm.judger.max_concurrent_api_number", std::to_string(g.max_concurrent));
  }
  if (g.replicate) ov.emplace_back("ddp_training.replicate_dataset_across_ranks", "true");
  if (g.o_start_index->count()) ov.emplace_back("run.start_index", std::to_string(g.start_index));
  if (g.o_max_dialogues->count()) ov.emplace_back("run.max_dialogues", std::to_string(g.max_dialogues));
  return load_config(g.config_paths, ov);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
  }
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  write_file(path, text);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_meta(const std::string& output, const std::string& command, const RunConfig& cfg) {
  json meta{{"command", command},
            {"output", fs::path(output).filename().string()},
            {"config_digest", cfg.digest()},
            {"config", cfg.with_provenance()}};
  write_json(output + ".meta.json", meta);
}

std::vector<json> read_jsonl(const std::string& path, std::vector<std::string>& violations) {
  std::vector<json> out;
  const std::vector<std::string> lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(json::parse(lines[i]));
    } catch (const json::exception& e) {
      violations.push_back("record " + std::to_string(i + 1) + ": " + e.what());
      out.emplace_back();  // keeps indices aligned with record numbers
    }
  }
  return out;
}

std::optional<ActionCatalog> load_catalog(const std::string& path) {
  if (path.empty()) return std::nullopt;
  const json j = json::parse(read_file(path));
  ActionCatalog c = catalog_from_json(j);
  const auto problems = validate_catalog(c);
  if (!problems.empty()) {
    std::string msg = "catalog " + path + " is invalid:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return c;
}

std::string pick(const std::string& flag, const RunConfig& cfg, const std::string& key) {
  return flag.empty() ? cfg.get_string(key) : flag;
}

void list(std::ostream& err, const std::string& title, const std::vector<std::string>& items) {
  err << title << " (" << items.size() << "):\n";
  for (const auto& s : items) err << "  " << s << "\n";
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string dataset, catalog, out_dir;
};

json summary_json(const DatasetReport& r) {
  json m = json::object();
  for (const auto& [name, s] : r.metrics) {
    m[name] = {{"mean", s.mean},           {"defined", s.defined},     {"undefined", s.undefined},
               {"macro_mean", s.macro_mean}, {"macro_std", s.macro_std}, {"dialogues", s.dialogues}};
  }
  json j{{"metrics", m}, {"degenerate_references", r.degenerate_references}};
  if (r.difference) j["difference"] = {{"mu", r.difference->mu}, {"delta", r.difference->delta}};
  return j;
}

int cmd_evaluate(const EvaluateArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::vector<std::string> violations;
  const std::vector<json> records = read_jsonl(a.dataset, violations);
  const auto catalog = load_catalog(pick(a.catalog, cfg, "run.catalog_path"));

  std::vector<EvalDialogue> dialogues;
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].is_null()) continue;
    const std::string where = "record " + std::to_string(i + 1);
    EvalDialogue d;
    try {
      d = eval_dialogue_from_json(records[i]);
    } catch (const std::exception& e) {
      violations.push_back(where + ": " + e.what());
      continue;
    }
    const auto problems = validate_dialogue(d.reference);
    if (!problems.empty()) {
      for (const auto& p : problems) violations.push_back(where + " (" + d.reference.id + "): " + p);
      continue;
    }
    if (d.predictions.size() != d.reference.turns.size()) {
      violations.push_back(where + " (" + d.reference.id + "): " + std::to_string(d.predictions.size()) +
                           " predictions for " + std::to_string(d.reference.turns.size()) + " turns");
      continue;
    }
    if (catalog) {
      for (std::size_t t = 0; t < d.predictions.size(); ++t) {
        for (const ActionInstance& act : d.predictions[t].actions) {
          for (const auto& w : validate_instance(act, *catalog)) {
            warnings.push_back(d.reference.id + " turn " + std::to_string(t + 1) + ": " + w);
          }
        }
      }
    }
    dialogues.push_back(std::move(d));
  }
  if (dialogues.empty() && violations.empty()) {
    err << "error: no dialogues in " << a.dataset << "\n";
    return kExitValidation;
  }

  std::optional<TransitionModel> transitions;
  if (catalog) {
    transitions.emplace(catalog->action_names());
    transitions->add_workflows(catalog->workflows);
    for (const EvalDialogue& d : dialogues) transitions->add_dialogue(d.reference);
  }
  EvalOptions opt;
  const std::string ftr = cfg.get_string("run.ftr_mode");
  if (ftr == "no_range") opt.ftr_mode = FtrMode::kNoRange;
  else if (ftr == "outside_turn") opt.ftr_mode = FtrMode::kOutsideTurn;
  else throw RunConfigError(ConfigErrorKind::kTypeMismatch, "run.ftr_mode: unknown mode '" + ftr + "'");
  if (transitions) opt.transitions = &*transitions;

  std::vector<TurnResult> per_turn;
  for (const EvalDialogue& d : dialogues) {
    auto r = evaluate_dialogue(d, opt);
    per_turn.insert(per_turn.end(), r.begin(), r.end());
  }
  const DatasetReport report = aggregate_report(per_turn);
  const std::string csv_path = (fs::path(a.out_dir) / "report.csv").string();
  write_text(csv_path, report_to_csv(report));
  write_meta(csv_path, "evaluate", cfg);
  json summary = summary_json(report);
  summary["config_digest"] = cfg.digest();
  summary["dialogues"] = dialogues.size();
  summary["turns"] = per_turn.size();
  summary["violations"] = violations;
  summary["catalog_warnings"] = warnings;
  write_json((fs::path(a.out_dir) / "summary.json").string(), summary);

  out << "evaluated " << dialogues.size() << " dialogues, " << per_turn.size() << " turns -> " << csv_path << "\n";
  if (!warnings.empty()) list(err, "catalog warnings", warnings);
  if (!violations.empty()) {
    list(err, "validation failures", violations);
    return kExitValidation;
  }
  return kExitOk;
}

// ---- reward -----------------------------------------------------------------

struct RewardArgs {
  std::string rollouts, out, judge_responses;
  int step = 0;
  int total_steps = 0;
};

std::vector<RolloutRecord> load_rollouts(const std::string& path) {
  std::vector<std::string> violations;
  const std::vector<json> records = read_jsonl(path, violations);
  std::vector<RolloutRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].is_null()) continue;
    try {
      out.push_back(records[i].get<RolloutRecord>());
    } catch (const std::exception& e) {
      violations.push_back("record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (!violations.empty()) {
    std::string msg = "malformed rollout records:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ValidationError(msg);
  }
  return out;
}

void apply_judge_responses(std::vector<RolloutRecord>& rollouts, const std::string& path) {
  std::map<std::string, RolloutRecord*> by_id;
  for (RolloutRecord& r : rollouts) by_id[r.scenario_id] = &r;
  std::vector<std::string> problems;
  for (const std::string& line : read_lines(path)) {
    const json j = json::parse(line);
    const std::string id = j.at("scenario_id").get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      problems.push_back(id + ": no such scenario");
      continue;
    }
    RolloutRecord& r = *it->second;
    std::set<std::string> ids;
    for (std::size_t k = 1; k <= r.trajectories.size(); ++k) ids.insert(std::to_string(k));
    try {
      for (const RulerScore& s : parse_ruler_scores(j.at("response").get<std::string>(), ids)) {
        r.trajectories[std::stoul(s.trajectory_id) - 1].judge_score = s.score;
      }
    } catch (const RulerParseError& e) {
      problems.push_back(id + ": " + std::string(to_string(e.kind)) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "judge responses rejected:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
}

int cmd_reward(const RewardArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  ParsedRule parsed;
  try {
    parsed = parse_reward_rule(cfg.get_string("llm.trajectory_reward_rule"));
  } catch (const RewardError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  std::vector<RolloutRecord> rollouts = load_rollouts(a.rollouts);
  std::vector<std::string> inconsistent;
  for (const RolloutRecord& r : rollouts) {
    auto v = check_self_consistency(r);
    inconsistent.insert(inconsistent.end(), v.begin(), v.end());
  }
  if (!inconsistent.empty()) {
    list(err, "stored metric scores do not match their payloads", inconsistent);
    return kExitValidation;
  }
  if (!a.judge_responses.empty()) apply_judge_responses(rollouts, a.judge_responses);

  if (rule_requires_judge(parsed.rule)) {
    std::vector<std::string> missing;
    for (const RolloutRecord& r : rollouts) {
      for (const RolloutTrajectory& t : r.trajectories) {
        if (!t.judge_score) {
          missing.push_back(r.scenario_id);
          break;
        }
      }
    }
    if (!missing.empty()) {
      list(err, "rule " + std::string(to_string(parsed.rule)) + " needs judge scores; groups without them",
           missing);
      return kExitValidation;
    }
  }

  RewardSchedule sched;
  sched.rule = parsed.rule;
  sched.base = parsed.base.value_or(MetricBase::kRac);
  sched.lambda = cfg.get_double("llm.hybrid_ruler_weight");
  sched.lambda_max = cfg.get_double("llm.upper_limit_weight_for_scheduled_ruler");
  sched.total_steps = a.total_steps > 0 ? a.total_steps : static_cast<int>(cfg.get_int("training.total_steps"));
  const StdKind std_kind = cfg.get_string("training.advantage_std") == "sample" ? StdKind::kSample : StdKind::kPopulation;

  const std::string digest = cfg.digest();
  ensure_parent(a.out);
  auto sink = open_line_writer(a.out);
  for (RolloutRecord& r : rollouts) {
    GroupRewards g;
    g.step = a.step;
    for (RolloutTrajectory& t : r.trajectories) {
      const TurnRewardInput in{t.metrics.rac, t.metrics.max_rac, t.metrics.ptr, t.metrics.ftr, t.judge_score};
      t.reward = compute_reward(in, sched, a.step);
      g.rewards.push_back(*t.reward);
    }
    const auto adv = group_advantages(g, std_kind);
    for (std::size_t k = 0; k < adv.size(); ++k) r.trajectories[k].advantage = adv[k];
    json j = r;
    j["reward_rule"] = cfg.get_string("llm.trajectory_reward_rule");
    j["step"] = a.step;
    j["total_steps"] = sched.total_steps;
    j["config_digest"] = digest;
    sink->write_line(j.dump());
  }
  sink->close();
  write_meta(a.out, "reward", cfg);
  out << "rewarded " << rollouts.size() << " groups -> " << a.out << "\n";
  return kExitOk;
}

// ---- ruler-prompt -----------------------------------------------------------

struct RulerPromptArgs {
  std::string rollouts, out_dir;
};

int cmd_ruler_prompt(const RulerPromptArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto rollouts = load_rollouts(a.rollouts);
  const auto rules = cfg.get_list("llm.judger.custom_ruler_placeholder");
  for (const RolloutRecord& r : rollouts) {
    const std::string path = (fs::path(a.out_dir) / (r.scenario_id + ".prompt.txt")).string();
    write_text(path, build_ruler_prompt(ruler_group(r), rules).to_text());
  }
  write_json((fs::path(a.out_dir) / "prompts.json").string(),
             {{"config_digest", cfg.digest()}, {"groups", rollouts.size()}, {"custom_rules", rules.size()}});
  out << "wrote " << rollouts.size() << " judge prompts -> " << a.out_dir << "\n";
  return kExitOk;
}

// ---- sim --------------------------------------------------------------------

struct SimArgs {
  std::string scenario, out;
};

json server_stats_json(const ServerStats& s) {
  return {{"id", s.id},
          {"port", s.port},
          {"requests", s.requests},
          {"busy_time", s.busy_time},
          {"mean_response_time", s.mean_response_time},
          {"ready_at", s.ready_at}};
}

int cmd_sim(const SimArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const json sc = json::parse(read_file(a.scenario));
  const std::uint64_t seed = sc.value("seed", static_cast<std::uint64_t>(cfg.get_int("run.seed")));

  ClusterConfig cc;
  cc.gpu_count = sc.value("gpu_count", static_cast<int>(cfg.get_int("cluster.gpu_count")));
  cc.gpu_memory_fraction_per_server =
      sc.value("gpu_memory_per_server", cfg.get_double("cluster.gpu_memory_per_server"));
  cc.port_start = static_cast<int>(cfg.get_int("cluster.port_range_start"));
  cc.port_end = static_cast<int>(cfg.get_int("cluster.port_range_end"));
  const LbStrategy strategy =
      parse_lb_strategy(sc.value("strategy", cfg.get_string("cluster.load_balancing_strategy")));
  const bool concurrent = sc.value("concurrent_startup", cfg.get_bool("cluster.concurrent_startup"));

  json result{{"config_digest", cfg.digest()}, {"seed", seed}, {"strategy", to_string(strategy)}};

  if (sc.contains("workload")) {
    const int workload = sc.at("workload").get<int>();
    ServiceModel service;
    if (sc.contains("calibrate_to")) {
      const json& c = sc.at("calibrate_to");
      std::vector<std::pair<int, double>> pts;
      for (const json& p : c.at("points")) pts.emplace_back(p.at(0).get<int>(), p.at(1).get<double>());
      service = calibrate_service_model(c.value("workload", workload), pts);
    }
    if (sc.contains("service")) {
      const json& s = sc.at("service");
      service.service_time = s.value("service_time", service.service_time);
      service.capacity = s.value("capacity", service.capacity);
      service.startup_time = s.value("startup_time", service.startup_time);
      service.startup_lag = s.value("startup_lag", service.startup_lag);
      service.jitter = s.value("jitter", service.jitter);
    }
    std::vector<HealthEvent> events;
    for (const json& e : sc.value("health_events", json::array())) {
      events.push_back({e.at("time").get<double>(), e.at("server").get<int>(), e.at("healthy").get<bool>()});
    }
    result["service"] = {{"service_time", service.service_time}, {"capacity", service.capacity},
                         {"startup_time", service.startup_time}, {"startup_lag", service.startup_lag},
                         {"jitter", service.jitter}};
    json rows = json::array();
    double base = 0;
    for (const json& n : sc.at("server_counts")) {
      cc.max_servers_per_model = n.get<int>();
      const auto servers = plan_cluster(cc);
      if (static_cast<int>(servers.size()) != cc.max_servers_per_model) {
        throw ClusterError("cluster holds only " + std::to_string(servers.size()) + " servers, scenario asks for " +
                           std::to_string(cc.max_servers_per_model));
      }
      const RolloutResult r = simulate_rollout_phase(workload, servers, service, strategy, concurrent, seed, events);
      if (rows.empty()) base = r.makespan;
      json per = json::array();
      for (const ServerStats& s : r.servers) per.push_back(server_stats_json(s));
      rows.push_back({{"servers", cc.max_servers_per_model},
                      {"makespan", r.makespan},
                      {"speedup", r.makespan > 0 ? base / r.makespan : 0.0},
                      {"completed", r.completed},
                      {"requeued", r.requeued},
                      {"terminated_early", r.terminated_early},
                      {"per_server", per}});
    }
    result["workload"] = workload;
    result["rollout"] = rows;
  }

  if (sc.contains("training")) {
    const json& t = sc.at("training");
    const int workers = t.value("workers", static_cast<int>(cfg.get_int("ddp_training.world_size")));
    const bool replicate = t.value("replicate", cfg.get_bool("ddp_training.replicate_dataset_across_ranks"));
    const PayloadPlan plan = partition_payload(t.at("rollout_groups").get<int>(), workers, replicate);
    TrainOptions opt;
    opt.base_batch = t.value("base_batch", static_cast<int>(cfg.get_int("training.training_batch_size")));
    opt.token_budget = t.value("token_budget", 0L);
    opt.dynamic = t.value("dynamic", cfg.get_bool("ddp_training.batch_size_allow_adjusting"));
    opt.epochs = t.value("epochs", 1);
    opt.sample_tokens = t.value("sample_tokens", std::vector<int>{});
    opt.seconds_per_token = t.value("seconds_per_token", opt.seconds_per_token);
    opt.step_overhead = t.value("step_overhead", opt.step_overhead);
    if (t.contains("failure")) opt.failure = FailureInjection{t["failure"].at("worker"), t["failure"].at("step")};
    const auto traces = simulate_training(plan, opt);
    json steps = json::array();
    for (const TrainStepTrace& s : traces) {
      steps.push_back({{"step", s.step},
                       {"epoch", s.epoch},
                       {"batch_sizes", s.batch_sizes},
                       {"barrier_times", s.barrier_times},
                       {"effective_token_budget", s.effective_token_budget},
                       {"partial", s.partial},
                       {"checkpoint", s.checkpoint},
                       {"error_terminated", s.error_terminated}});
    }
    result["training"] = {{"workers", workers},
                          {"replicate", replicate},
                          {"aligned_size", plan.aligned_size},
                          {"steps", steps},
                          {"per_worker_visits", per_worker_visits(traces, workers)}};
  }
  write_json(a.out, result);
  out << "simulation -> " << a.out << "\n";
  return kExitOk;
}

// ---- rank -------------------------------------------------------------------

struct RankArgs {
  std::vector<std::string> tables;
  std::string out_dir;
  int top_k = 4;
};

int cmd_rank(const RankArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  json groups = json::object();
  for (const std::string& path : a.tables) {
    const std::string group = fs::path(path).stem().string();
    const auto ranked = rank_group(compute_pri(read_model_rows_csv(read_file(path))), a.top_k);
    const std::string csv = (fs::path(a.out_dir) / ("ranking_" + group + ".csv")).string();
    write_text(csv, ranked_to_csv(ranked));
    write_meta(csv, "rank", cfg);
    json rows = json::array();
    for (const RankedEntry& e : ranked) {
      rows.push_back({{"rank", e.rank},
                      {"marker", e.marker},
                      {"model_id", e.result.model_id},
                      {"ci", e.result.ci},
                      {"ti", e.result.ti},
                      {"pri", e.result.pri},
                      {"tied", e.tied}});
      if (!e.marker.empty()) out << group << " " << e.marker << " " << e.result.model_id << "\n";
    }
    groups[group] = rows;
  }
  write_json((fs::path(a.out_dir) / "ranking.json").string(), {{"config_digest", cfg.digest()}, {"groups", groups}});
  return kExitOk;
}

// ---- align ------------------------------------------------------------------

struct AlignArgs {
  std::string dialogues, annotations, out_dir;
  std::vector<int> sigmas;
};

std::vector<Dialogue> load_dialogues(const std::string& path) {
  std::vector<std::string> violations;
  const auto records = read_jsonl(path, violations);
  std::vector<Dialogue> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].is_null()) continue;
    try {
      out.push_back(records[i].get<Dialogue>());
    } catch (const std::exception& e) {
      violations.push_back("record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (!violations.empty()) {
    std::string msg = "malformed dialogue records in " + path + ":";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ValidationError(msg);
  }
  return out;
}

int cmd_align(const AlignArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto dialogues = load_dialogues(a.dialogues);
  const auto triggers = collect_triggers(dialogues);
  if (triggers.empty()) throw ValidationError("no observed triggers in " + a.dialogues);
  AnnotationSet ranges;
  if (a.annotations.empty()) {
    ranges = collect_ranges(dialogues);
  } else {
    std::vector<std::string> bad;
    for (const json& j : read_jsonl(a.annotations, bad)) {
      if (j.is_null()) continue;
      const std::string id = j.at("dialogue_id").get<std::string>();
      ranges[id] = j.contains("reference_ranges") ? j.at("reference_ranges").get<ReferenceRange>()
                                                  : compute_reference_ranges(j.get<Dialogue>());
    }
    if (!bad.empty()) throw ValidationError("malformed annotation records: " + bad.front());
  }
  std::vector<int> sigmas = a.sigmas;
  if (sigmas.empty()) sigmas = {static_cast<int>(cfg.get_int("alignment.sigma"))};
  const double threshold = cfg.get_double("alignment.dialogue_pass_threshold");
  const auto rows = ec_sweep(triggers, ranges, sigmas, threshold);
  const std::string csv = (fs::path(a.out_dir) / "ec_sweep.csv").string();
  write_text(csv, sweep_to_csv(rows));
  write_meta(csv, "align", cfg);

  const int sigma = static_cast<int>(cfg.get_int("alignment.sigma"));
  const QualityStats q =
      annotation_quality_stats(ranges, triggers, cfg.get_string("alignment.critical_action"), sigma, threshold);
  const DatasetEc ec = dataset_ec(triggers, ranges, sigma);
  const FilterResult f = filter_dialogues(ec.per_dialogue, threshold);
  write_json((fs::path(a.out_dir) / "quality.json").string(),
             {{"config_digest", cfg.digest()},
              {"sigma", sigma},
              {"threshold", threshold},
              {"triggers", triggers.size()},
              {"overall_coverage", q.overall_coverage},
              {"annotation_coverage", q.annotation_coverage},
              {"score_consistency", q.score_consistency},
              {"turn_gap_mean", q.turn_gap_mean},
              {"phantom_noise_rate", q.phantom_noise_rate},
              {"critical_miss_rate", q.critical_miss_rate},
              {"phantom_ranges", q.phantom_ranges},
              {"missing_annotations", q.missing_annotations},
              {"kept_dialogues", f.kept},
              {"dropped_dialogues", f.dropped}});
  out << "EC sweep over " << triggers.size() << " triggers, " << sigmas.size() << " sigma values -> " << csv << "\n";
  return kExitOk;
}

// ---- annotate ---------------------------------------------------------------

struct AnnotateArgs {
  std::string annotator_config, input, responses, catalog, out;
};

CompletionProvider replay_provider(const std::string& path) {
  auto table = std::make_shared<std::map<std::pair<std::string, int>, std::vector<std::string>>>();
  for (const std::string& line : read_lines(path)) {
    const json j = json::parse(line);
    (*table)[{j.at("dialogue_id").get<std::string>(), j.at("turn").get<int>()}].push_back(
        j.at("response").get<std::string>());
  }
  return [table](const CompletionRequest& req) -> std::string {
    auto it = table->find({req.dialogue_id, req.turn});
    if (it == table->end() || req.attempt > static_cast<int>(it->second.size())) {
      throw ProviderError("no scripted response for " + req.dialogue_id + " turn " + std::to_string(req.turn) +
                          " attempt " + std::to_string(req.attempt));
    }
    return it->second[static_cast<std::size_t>(req.attempt - 1)];
  };
}

int cmd_annotate(const AnnotateArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  AnnotatorConfig ac = a.annotator_config.empty() ? AnnotatorConfig{} : load_annotator_config(a.annotator_config);
  if (cfg.source("run.start_index") != "default") ac.start_index = static_cast<int>(cfg.get_int("run.start_index"));
  if (cfg.source("run.max_dialogues") != "default") {
    const long m = cfg.get_int("run.max_dialogues");
    ac.max_dialogues = m < 0 ? std::nullopt : std::optional<int>(static_cast<int>(m));
  }
  if (cfg.source("run.with_future") != "default") ac.with_future = cfg.get_bool("run.with_future");
  if (cfg.source("llm.judger.max_concurrent_api_number") != "default") {
    ac.max_workers = static_cast<int>(cfg.get_int("llm.judger.max_concurrent_api_number"));
  }
  std::string catalog_path = a.catalog;
  if (catalog_path.empty()) catalog_path = ac.catalog_path;
  if (catalog_path.empty()) catalog_path = cfg.get_string("run.catalog_path");
  const auto catalog = load_catalog(catalog_path);
  if (!catalog) throw ValidationError("annotate needs an action catalog (--catalog)");

  const auto dialogues = load_dialogues(a.input);
  const std::string out_path = a.out.empty() ? annotated_output_path(a.input, ac.output_suffix) : a.out;
  std::ofstream log_stream;
  std::optional<ProgressLog> progress;
  if (!ac.log_file.empty()) {
    log_stream.open(ac.log_file, std::ios::app);
    if (!log_stream) throw IoError("cannot open log file " + ac.log_file);
    progress.emplace(&log_stream);
  }
  ensure_parent(out_path);
  auto sink = open_line_writer(out_path, ac.start_index > 0);
  BatchReport rep;
  try {
    rep = run_batch(dialogues, *catalog, replay_provider(a.responses), ac, *sink, progress ? &*progress : nullptr);
  } catch (const BatchWriteError& e) {
    err << "error: " << e.what() << "\n"
        << "resume with --start-index " << e.resume_index << " (" << e.completed << " records written)\n";
    return kExitIo;
  }
  write_json(out_path + ".meta.json", {{"command", "annotate"},
                                       {"config_digest", cfg.digest()},
                                       {"model", ac.model_id},
                                       {"with_future", ac.with_future},
                                       {"start_index", rep.start_index},
                                       {"next_index", rep.next_index},
                                       {"processed", rep.processed},
                                       {"dialogue_ids", rep.dialogue_ids},
                                       {"failed_turns", rep.failed_turns},
                                       {"retries", rep.retries},
                                       {"violations", rep.violations}});
  out << "annotated " << rep.processed << " dialogues -> " << out_path << "\n";
  return rep.failed_turns > 0 || rep.violations > 0 ? kExitValidation : kExitOk;
}

// ---- catalog / estimate-properties ------------------------------------------

struct CatalogArgs {
  std::string ontology, types, properties, out;
};

int cmd_catalog(const CatalogArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ActionCatalog c = render_catalog(json::parse(read_file(a.ontology)), json::parse(read_file(a.types)),
                                         json::parse(read_file(a.properties)));
  const auto problems = validate_catalog(c);
  if (!problems.empty()) {
    list(err, "catalog violations", problems);
    return kExitValidation;
  }
  write_text(a.out, serialize_catalog(c));
  write_meta(a.out, "catalog", cfg);
  out << "catalog " << c.name << " " << c.version << " with " << c.actions.size() << " actions -> " << a.out << "\n";
  return kExitOk;
}

struct EstimateArgs {
  std::string samples, out;
};

int cmd_estimate(const EstimateArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  std::map<std::string, std::vector<std::set<std::string>>> by_action;
  for (const std::string& line : read_lines(a.samples)) {
    const json j = json::parse(line);
    by_action[j.at("action").get<std::string>()].push_back(j.at("params").get<std::set<std::string>>());
  }
  json props = json::object();
  for (const auto& [action, samples] : by_action) {
    json p = json::object();
    for (const auto& [param, kind] : estimate_parameter_properties(samples)) p[param] = std::string(to_string(kind));
    props[action] = p;
  }
  write_json(a.out, props);
  write_meta(a.out, "estimate-properties", cfg);
  out << "estimated properties for " << by_action.size() << " actions -> " << a.out << "\n";
  return kExitOk;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string out, responses_out, catalog_out;
  int count = 50;
  int min_turns = 8;
  int max_turns = 16;
  bool strip = false;
  bool flaky = false;
};

int cmd_synth(const SynthArgs& a, const RunConfig& cfg, std::ostream& out, std::ostream&) {
  SynthOptions opt;
  opt.dialogues = a.count;
  opt.min_turns = a.min_turns;
  opt.max_turns = a.max_turns;
  opt.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed"));
  if (opt.min_turns < 3 || opt.max_turns < opt.min_turns) throw ValidationError("need 3 <= min-turns <= max-turns");
  const auto dialogues = synth_dialogues(opt);
  ensure_parent(a.out);
  auto sink = open_line_writer(a.out);
  for (const Dialogue& d : dialogues) sink->write_line(json(a.strip ? strip_annotations(d) : d).dump());
  sink->close();
  write_meta(a.out, "synth", cfg);
  if (!a.responses_out.empty()) {
    ensure_parent(a.responses_out);
    auto rs = open_line_writer(a.responses_out);
    for (const Dialogue& d : dialogues) {
      for (const TurnAnnotation& ta : d.turns) {
        const int attempts = a.flaky && ta.turn.index % 5 == 0 ? 2 : 1;
        for (int k = 1; k <= attempts; ++k) {
          rs->write_line(json{{"dialogue_id", d.id},
                              {"turn", ta.turn.index},
                              {"response", scripted_annotation_response(d, ta.turn.index, k, a.flaky)}}
                             .dump());
        }
      }
    }
    rs->close();
  }
  if (!a.catalog_out.empty()) write_text(a.catalog_out, serialize_catalog(synthetic_catalog()));
  out << "generated " << dialogues.size() << " dialogues (seed " << opt.seed << ") -> " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Proactive action scheduling toolkit", "prosched"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_paths, "Run configuration YAML (repeatable, later files win)");
  app.add_option("--set", g.sets, "Override one configuration key: key=value");
  g.o_seed = app.add_option("--seed", g.seed, "Seed for all randomness");
  g.o_lambda_max = app.add_option("--lambda-max", g.lambda_max, "Ceiling of the scheduled judge weight");
  g.o_reward_rule = app.add_option("--reward-rule", g.reward_rule, "Trajectory reward rule");
  g.o_sigma = app.add_option("--sigma", g.sigma, "Early-ready margin in turns");
  app.add_flag("--without-future", g.without_future, "Hide turns after the annotated one");
  g.o_max_concurrent =
      app.add_option("--max-concurrent-api-number", g.max_concurrent, "Concurrent model calls");
  app.add_flag("--replicate-dataset-across-ranks", g.replicate, "Replicate the payload on every worker");
  g.o_start_index = app.add_option("--start-index", g.start_index, "First dialogue index to process");
  g.o_max_dialogues = app.add_option("--max-dialogues", g.max_dialogues, "Upper bound on dialogues processed");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score predictions against reference annotations");
  c_eval->add_option("--dataset", ev.dataset, "Evaluation JSONL (optionally gzip)")->required();
  c_eval->add_option("--catalog", ev.catalog, "Action catalog JSON");
  c_eval->add_option("--out-dir", ev.out_dir, "Report directory")->required();

  RewardArgs rw;
  auto* c_reward = app.add_subcommand("reward", "Attach rewards and advantages to rollout groups");
  c_reward->add_option("--rollouts", rw.rollouts, "Rollout JSONL")->required();
  c_reward->add_option("--out", rw.out, "Output JSONL")->required();
  c_reward->add_option("--judge-responses", rw.judge_responses, "Judge responses JSONL");
  c_reward->add_option("--step", rw.step, "Training step u")->check(CLI::NonNegativeNumber);
  c_reward->add_option("--total-steps", rw.total_steps, "Total training steps U")->check(CLI::NonNegativeNumber);

  RulerPromptArgs rp;
  auto* c_rp = app.add_subcommand("ruler-prompt", "Render judge prompts for rollout groups");
  c_rp->add_option("--rollouts", rp.rollouts, "Rollout JSONL")->required();
  c_rp->add_option("--out-dir", rp.out_dir, "Prompt directory")->required();

  SimArgs sm;
  auto* c_sim = app.add_subcommand("sim", "Simulate rollout and training phases");
  c_sim->add_option("--scenario", sm.scenario, "Scenario JSON")->required();
  c_sim->add_option("--out", sm.out, "Result JSON")->required();

  RankArgs rk;
  auto* c_rank = app.add_subcommand("rank", "Rank models within comparison groups");
  c_rank->add_option("--table", rk.tables, "Group CSV (repeatable)")->required();
  c_rank->add_option("--out-dir", rk.out_dir, "Report directory")->required();
  c_rank->add_option("--top-k", rk.top_k, "Number of marked ranks")->check(CLI::PositiveNumber);

  AlignArgs al;
  auto* c_align = app.add_subcommand("align", "Early-ready criterion sweep over observed triggers");
  c_align->add_option("--dialogues", al.dialogues, "Dialogues with observed triggers")->required();
  c_align->add_option("--annotations", al.annotations, "Annotated dialogues (default: from --dialogues)");
  c_align->add_option("--sweep", al.sigmas, "Sigma values for the sweep")->delimiter(',');
  c_align->add_option("--out-dir", al.out_dir, "Report directory")->required();

  AnnotateArgs an;
  auto* c_ann = app.add_subcommand("annotate", "Annotate dialogues with a scripted model");
  c_ann->add_option("--annotator-config", an.annotator_config, "Annotator YAML");
  c_ann->add_option("--input", an.input, "Dialogue JSONL (optionally gzip)")->required();
  c_ann->add_option("--responses", an.responses, "Scripted model responses JSONL")->required();
  c_ann->add_option("--catalog", an.catalog, "Action catalog JSON");
  c_ann->add_option("--out", an.out, "Output path (default: <input stem><suffix>.jsonl.gz)");

  CatalogArgs ca;
  auto* c_cat = app.add_subcommand("catalog", "Render an action catalog");
  c_cat->add_option("--ontology", ca.ontology, "Ontology JSON")->required();
  c_cat->add_option("--types", ca.types, "Type specification JSON")->required();
  c_cat->add_option("--properties", ca.properties, "Parameter properties JSON")->required();
  c_cat->add_option("--out", ca.out, "Catalog JSON")->required();

  EstimateArgs es;
  auto* c_est = app.add_subcommand("estimate-properties", "Classify parameters as required or optional");
  c_est->add_option("--samples", es.samples, "Samples JSONL")->required();
  c_est->add_option("--out", es.out, "Properties JSON")->required();

  SynthArgs sy;
  auto* c_syn = app.add_subcommand("synth", "Generate seeded synthetic dialogues");
  c_syn->add_option("--out", sy.out, "Dialogue JSONL (optionally gzip)")->required();
  c_syn->add_option("--count", sy.count, "Number of dialogues")->check(CLI::PositiveNumber);
  c_syn->add_option("--min-turns", sy.min_turns, "Shortest dialogue");
  c_syn->add_option("--max-turns", sy.max_turns, "Longest dialogue");
  c_syn->add_flag("--strip", sy.strip, "Drop annotations and triggers");
  c_syn->add_option("--responses-out", sy.responses_out, "Scripted annotation responses JSONL");
  c_syn->add_flag("--flaky", sy.flaky, "Make every fifth turn need a retry");
  c_syn->add_option("--catalog-out", sy.catalog_out, "Write the matching action catalog");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const RunConfig cfg = build_config(g);
    if (c_eval->parsed()) return cmd_evaluate(ev, cfg, out, err);
    if (c_reward->parsed()) return cmd_reward(rw, cfg, out, err);
    if (c_rp->parsed()) return cmd_ruler_prompt(rp, cfg, out, err);
    if (c_sim->parsed()) return cmd_sim(sm, cfg, out, err);
    if (c_rank->parsed()) return cmd_rank(rk, cfg, out, err);
    if (c_align->parsed()) return cmd_align(al, cfg, out, err);
    if (c_ann->parsed()) return cmd_annotate(an, cfg, out, err);
    if (c_cat->parsed()) return cmd_catalog(ca, cfg, out, err);
    if (c_est->parsed()) return cmd_estimate(es, cfg, out, err);
    if (c_syn->parsed()) return cmd_synth(sy, cfg, out, err);
  } catch (const RunConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitConfig;
}

}  // namespace prosched
