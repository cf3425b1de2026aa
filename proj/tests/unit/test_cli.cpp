#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "prosched/action_state.hpp"
#include "prosched/cli.hpp"
#include "prosched/records.hpp"
#include "prosched/rollout.hpp"
#include "testkit.hpp"

using namespace prosched;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Three trajectories per scored turn of the first fixture dialogue: the
// reference itself, nothing, and the reference with every status flipped to pending.
std::vector<RolloutRecord> fixture_rollouts(int groups) {
  const Dialogue d = testkit::load_dialogues(testkit::data_path("fixture_dialogues.jsonl")).at(0);
  const ReferenceRange ranges = compute_reference_ranges(d);
  std::vector<RolloutRecord> out;
  for (const TurnAnnotation& ta : d.turns) {
    if (static_cast<int>(out.size()) == groups) break;
    RolloutRecord r;
    r.scenario_id = d.id + "-t" + std::to_string(ta.turn.index);
    r.dialogue_id = d.id;
    r.turn = ta.turn.index;
    r.system_message = "Track proactive actions.";
    r.user_message = ta.turn.text;
    r.reference = ta.actions;
    r.ranges = ranges;
    std::vector<TurnPrediction> preds{{ta.actions, {}}, {{}, {}}, {ta.actions, {}}};
    for (ActionInstance& a : preds[2].actions) a.status = TriggerStatus::kPending;
    for (std::size_t k = 0; k < preds.size(); ++k) {
      RolloutTrajectory t;
      t.id = std::to_string(k + 1);
      t.predicted = preds[k];
      t.metrics = score_trajectory(preds[k], r.reference, ranges, r.turn);
      r.trajectories.push_back(std::move(t));
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_rollouts(const std::string& path, const std::vector<RolloutRecord>& rs) {
  std::string text;
  for (const auto& r : rs) text += json(r).dump() + "\n";
  write_file(path, text);
}

std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> out;
  for (const auto& line : read_lines(path)) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("evaluate reproduces the golden report") {
  testkit::TempDir dir;
  const Run r = run({"evaluate", "--dataset", testkit::data_path("eval_golden.jsonl"), "--out-dir", dir.file("rep")});
  CHECK(r.code == kExitOk);
  CHECK(read_file(dir.file("rep/report.csv")) == read_file(testkit::data_path("eval_golden.report.csv")));
  const json summary = json::parse(read_file(dir.file("rep/summary.json")));
  CHECK(summary["dialogues"] == 2);
  CHECK(summary["turns"] == 5);
  CHECK(json::parse(read_file(dir.file("rep/report.csv.meta.json")))["config_digest"] == summary["config_digest"]);
}

TEST_CASE("evaluate reports malformed records and keeps the good ones") {
  testkit::TempDir dir;
  const Run r = run({"evaluate", "--dataset", testkit::data_path("eval_malformed.jsonl"), "--out-dir", dir.path()});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("validation failures (2)") != std::string::npos);
  const std::string csv = read_file(dir.file("report.csv"));
  CHECK(csv.find("\ng1,") != std::string::npos);
  CHECK(csv.find("\ngap,") == std::string::npos);

  write_file(dir.file("empty.jsonl"), "");
  const Run e = run({"evaluate", "--dataset", dir.file("empty.jsonl"), "--out-dir", dir.path()});
  CHECK(e.code == kExitValidation);
  CHECK(e.err.find("no dialogues") != std::string::npos);

  CHECK(run({"evaluate", "--dataset", dir.file("missing.jsonl"), "--out-dir", dir.path()}).code == kExitIo);
}

TEST_CASE("configuration and usage errors exit with the config code") {
  testkit::TempDir dir;
  write_file(dir.file("bad.yaml"), "llm:\n  max_tokns: 3\n");
  const Run r = run({"--config", dir.file("bad.yaml"), "synth", "--out", dir.file("x.jsonl")});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("llm.max_tokns") != std::string::npos);
  CHECK(run({"--set", "run.seed", "synth", "--out", dir.file("x.jsonl")}).code == kExitConfig);
  CHECK(run({"frobnicate"}).code == kExitConfig);
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"--help"}).code == kExitOk);

  write_rollouts(dir.file("r.jsonl"), fixture_rollouts(1));
  const Run u = run({"--reward-rule", "best_guess", "reward", "--rollouts", dir.file("r.jsonl"), "--out",
                     dir.file("o.jsonl")});
  CHECK(u.code == kExitConfig);
  CHECK(u.err.find("best_guess") != std::string::npos);
}

TEST_CASE("rollout records round-trip through JSON") {
  for (const RolloutRecord& r : fixture_rollouts(4)) {
    CHECK(json(r).get<RolloutRecord>() == r);
    CHECK(check_self_consistency(r).empty());
  }
  RolloutRecord r = fixture_rollouts(1).at(0);
  r.trajectories[1].metrics.rac = 0.5;
  CHECK(check_self_consistency(r).size() == 1);
}

TEST_CASE("reward attaches rewards and advantages") {
  testkit::TempDir dir;
  const auto groups = fixture_rollouts(3);
  write_rollouts(dir.file("r.jsonl"), groups);

  Run r = run({"--reward-rule", "rac", "reward", "--rollouts", dir.file("r.jsonl"), "--out", dir.file("rac.jsonl")});
  REQUIRE(r.code == kExitOk);
  auto out = read_jsonl(dir.file("rac.jsonl"));
  REQUIRE(out.size() == groups.size());
  for (std::size_t g = 0; g < out.size(); ++g) {
    double sum = 0;
    for (std::size_t k = 0; k < groups[g].trajectories.size(); ++k) {
      const json& t = out[g]["trajectories"][k];
      CHECK(t["reward"].get<double>() == groups[g].trajectories[k].metrics.rac);
      sum += t["advantage"].get<double>();
    }
    CHECK(std::fabs(sum) < 1e-9);
    CHECK(out[g]["reward_rule"] == "rac");
  }

  // Judge-based rules refuse to run without scores and name the groups.
  r = run({"--reward-rule", "adaptive_ruler", "reward", "--rollouts", dir.file("r.jsonl"), "--out",
           dir.file("ar.jsonl")});
  CHECK(r.code == kExitValidation);
  for (const auto& g : groups) CHECK(r.err.find(g.scenario_id) != std::string::npos);

  std::string responses;
  for (const auto& g : groups) {
    responses += json{{"scenario_id", g.scenario_id},
                      {"response", R"({"scores":[{"trajectory_id":"1","explanation":"a","score":0.9},)"
                                   R"({"trajectory_id":"2","explanation":"b","score":0.1},)"
                                   R"({"trajectory_id":"3","explanation":"c","score":0.4}]})"}}
                     .dump() +
                 "\n";
  }
  write_file(dir.file("judge.jsonl"), responses);
  r = run({"--reward-rule", "adaptive_ruler", "reward", "--rollouts", dir.file("r.jsonl"), "--judge-responses",
           dir.file("judge.jsonl"), "--out", dir.file("ar.jsonl"), "--step", "0", "--total-steps", "10"});
  REQUIRE(r.code == kExitOk);
  out = read_jsonl(dir.file("ar.jsonl"));
  for (std::size_t g = 0; g < out.size(); ++g) {
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(out[g]["trajectories"][k]["reward"].get<double>() ==
            doctest::Approx(groups[g].trajectories[k].metrics.rac).epsilon(1e-12));
    }
  }
  r = run({"--reward-rule", "ruler", "reward", "--rollouts", dir.file("r.jsonl"), "--judge-responses",
           dir.file("judge.jsonl"), "--out", dir.file("ru.jsonl")});
  REQUIRE(r.code == kExitOk);
  CHECK(read_jsonl(dir.file("ru.jsonl"))[0]["trajectories"][1]["reward"].get<double>() == doctest::Approx(0.1));

  write_file(dir.file("bad_judge.jsonl"),
             json{{"scenario_id", groups[0].scenario_id}, {"response", R"({"scores":[]})"}}.dump() + "\n");
  r = run({"--reward-rule", "ruler", "reward", "--rollouts", dir.file("r.jsonl"), "--judge-responses",
           dir.file("bad_judge.jsonl"), "--out", dir.file("x.jsonl")});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("missing") != std::string::npos);

  auto tampered = groups;
  tampered[1].trajectories[0].metrics.ptr += 0.25;
  write_rollouts(dir.file("t.jsonl"), tampered);
  r = run({"reward", "--rollouts", dir.file("t.jsonl"), "--out", dir.file("x.jsonl")});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find(tampered[1].scenario_id + "/1: stored ptr") != std::string::npos);
}

TEST_CASE("ruler-prompt renders one prompt per group") {
  testkit::TempDir dir;
  write_rollouts(dir.file("r.jsonl"), fixture_rollouts(2));
  const Run r = run({"--set", "llm.judger.custom_ruler_placeholder=[be strict]", "ruler-prompt", "--rollouts",
                     dir.file("r.jsonl"), "--out-dir", dir.file("p")});
  REQUIRE(r.code == kExitOk);
  const json meta = json::parse(read_file(dir.file("p/prompts.json")));
  CHECK(meta["groups"] == 2);
  CHECK(meta["custom_rules"] == 1);
  const std::string first = fixture_rollouts(1)[0].scenario_id;
  CHECK(read_file(dir.file("p/" + first + ".prompt.txt")).find("be strict") != std::string::npos);
}

TEST_CASE("sim writes calibrated rollout rows") {
  testkit::TempDir dir;
  const Run r = run({"sim", "--scenario", testkit::data_path("sim_calibrated.json"), "--out", dir.file("s.json")});
  REQUIRE(r.code == kExitOk);
  const json s = json::parse(read_file(dir.file("s.json")));
  const auto& rows = s["rollout"];
  REQUIRE(rows.size() == 16);
  CHECK(rows[0]["makespan"].get<double>() == doctest::Approx(1600).epsilon(0.01));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i]["makespan"].get<double>() <= rows[i - 1]["makespan"].get<double>());
  }
  CHECK(rows[7]["makespan"].get<double>() < rows[1]["makespan"].get<double>());
  CHECK(s["training"]["aligned_size"] == 40);
  CHECK(s["training"]["per_worker_visits"].size() == 4);

  write_file(dir.file("big.json"), R"({"workload": 10, "server_counts": [64]})");
  CHECK(run({"sim", "--scenario", dir.file("big.json"), "--out", dir.file("b.json")}).code != kExitOk);
}

TEST_CASE("rank marks the top models") {
  testkit::TempDir dir;
  const Run r = run({"rank", "--table", testkit::data_path("group_abcd.csv"), "--table",
                     testkit::data_path("group_home_loan.csv"), "--out-dir", dir.path()});
  REQUIRE(r.code == kExitOk);
  int lines = 0;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 8);
  CHECK(r.out.find("group_abcd ") != std::string::npos);
  CHECK(r.out.find("group_home_loan ") != std::string::npos);
  const json j = json::parse(read_file(dir.file("ranking.json")));
  CHECK(j["groups"].contains("group_abcd"));
  CHECK(std::filesystem::exists(dir.file("ranking_group_home_loan.csv")));
}

TEST_CASE("align sweeps sigma") {
  testkit::TempDir dir;
  const Run r = run({"align", "--dialogues", testkit::data_path("fixture_dialogues.jsonl"), "--sweep", "0,1,2,3,4",
                     "--out-dir", dir.path()});
  REQUIRE(r.code == kExitOk);
  const auto lines = read_lines(dir.file("ec_sweep.csv"));
  REQUIRE(lines.size() == 6);
  CHECK(lines[1].rfind("0,", 0) == 0);
  CHECK(lines[5].rfind("4,", 0) == 0);
  const json q = json::parse(read_file(dir.file("quality.json")));
  CHECK(q["kept_dialogues"].size() + q["dropped_dialogues"].size() == 20);
}

TEST_CASE("synth then annotate through scripted responses") {
  testkit::TempDir dir;
  Run r = run({"--seed", "5", "synth", "--count", "6", "--strip", "--out", dir.file("in.jsonl"), "--responses-out",
               dir.file("resp.jsonl"), "--catalog-out", dir.file("cat.json"), "--flaky"});
  REQUIRE(r.code == kExitOk);
  r = run({"--max-concurrent-api-number", "3", "annotate", "--input", dir.file("in.jsonl"), "--responses",
           dir.file("resp.jsonl"), "--catalog", dir.file("cat.json"), "--out", dir.file("out.jsonl.gz")});
  REQUIRE(r.code == kExitOk);
  const auto ann = testkit::load_dialogues(dir.file("out.jsonl.gz"));
  CHECK(ann.size() == 6);
  const json meta = json::parse(read_file(dir.file("out.jsonl.gz.meta.json")));
  CHECK(meta["retries"].get<int>() > 0);
  CHECK(meta["failed_turns"] == 0);

  // Without a catalog the run cannot validate actions.
  r = run({"annotate", "--input", dir.file("in.jsonl"), "--responses", dir.file("resp.jsonl"), "--out",
           dir.file("o2.jsonl")});
  CHECK(r.code == kExitValidation);
}
