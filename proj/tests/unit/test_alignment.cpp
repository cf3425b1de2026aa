#include <doctest.h>

#include <algorithm>
#include <set>

#include "prosched/alignment.hpp"
#include "prosched/synth.hpp"
#include "testkit.hpp"

using namespace prosched;

namespace {

ReferenceRange ready_at(std::initializer_list<std::pair<const char*, std::set<int>>> items) {
  ReferenceRange r;
  for (const auto& [name, turns] : items) {
    r.per_action[name] = turns;
    for (int t : turns) r.occurrences[name].emplace_back(t, TriggerStatus::kReadyToTrigger);
  }
  return r;
}

}  // namespace

TEST_CASE("early-ready criterion per trigger") {
  const ReferenceRange r = ready_at({{"a", {5, 6, 7}}});
  CHECK(ec_score({"d", 7, "a"}, r, 2) == 1.0);
  CHECK(ec_score({"d", 7, "a"}, r, 3) == 0.0);
  CHECK(ec_score({"d", 7, "b"}, r, 0) == 0.0);
  CHECK(ec_score({"d", 5, "a"}, r, 0) == 1.0);
  CHECK(ec_score({"d", 4, "a"}, r, 0) == 0.0);
}

TEST_CASE("dataset EC") {
  AnnotationSet ann{{"d1", ready_at({{"a", {2}}})}, {"d2", ready_at({{"b", {6}}})}};
  auto ec = dataset_ec({{"d1", 3, "a"}, {"d2", 3, "b"}}, ann, 0);
  CHECK(ec.mean == 0.5);
  CHECK(ec.satisfied == 1);
  CHECK(ec.per_dialogue.at("d1") == 1.0);
  CHECK(ec.per_dialogue.at("d2") == 0.0);
  ec = dataset_ec({{"d1", 3, "a"}}, ann, 0);
  CHECK(ec.mean == 1.0);
  CHECK(dataset_ec({{"d9", 3, "a"}}, ann, 0).mean == 0.0);
  CHECK_THROWS_AS(dataset_ec({}, ann, 0), std::invalid_argument);
}

TEST_CASE("dialogue filter") {
  auto f = filter_dialogues({{"d1", 0.9}, {"d2", 0.7}}, 0.8);
  CHECK(f.kept == std::vector<std::string>{"d1"});
  CHECK(f.dropped == std::vector<std::string>{"d2"});
  f = filter_dialogues({{"d1", 0.8}, {"d2", 0.0}, {"d3", 0.1}}, 0.0);
  CHECK(f.kept == std::vector<std::string>{"d1", "d3"});
  CHECK(filter_dialogues({{"d1", 1.0}}, 1.0).kept.empty());
  CHECK_THROWS(filter_dialogues({}, 1.5));
}

TEST_CASE("EC is non-increasing in sigma and the filter partitions") {
  testkit::Rng rng(44);
  for (int iter = 0; iter < 40; ++iter) {
    SynthOptions opt;
    opt.dialogues = 20;
    opt.seed = rng();
    const auto dialogues = synth_dialogues(opt);
    const auto triggers = collect_triggers(dialogues);
    const auto ann = collect_ranges(dialogues);
    double prev = 2;
    for (int sigma = 0; sigma <= 6; ++sigma) {
      const DatasetEc ec = dataset_ec(triggers, ann, sigma);
      CHECK(ec.mean <= prev);
      prev = ec.mean;
      for (double th : {0.0, 0.5, 0.8, 1.0}) {
        const FilterResult f = filter_dialogues(ec.per_dialogue, th);
        std::set<std::string> kept(f.kept.begin(), f.kept.end()), all = kept;
        for (const auto& id : f.dropped) {
          CHECK(kept.count(id) == 0);
          all.insert(id);
        }
        CHECK(all.size() == ec.per_dialogue.size());
      }
    }
  }
}

TEST_CASE("sigma 0 means the range starts no later than the trigger") {
  testkit::Rng rng(7);
  for (int iter = 0; iter < 500; ++iter) {
    const ReferenceRange r = testkit::gen_ranges(rng, 10);
    const ObservedTrigger g{"d", testkit::pick(rng, 1, 10), std::string(1, static_cast<char>('a' + testkit::pick(rng, 0, 2)))};
    const auto* turns = r.ready_turns(g.action);
    const bool expect = turns && std::any_of(turns->begin(), turns->end(), [&](int t) { return t <= g.turn; });
    CHECK(ec_score(g, r, 0) == (expect ? 1.0 : 0.0));
  }
}

TEST_CASE("sweep rows") {
  AnnotationSet ann{{"d1", ready_at({{"a", {2}}})}, {"d2", ready_at({{"b", {6}}})}};
  const auto rows = ec_sweep({{"d1", 5, "a"}, {"d2", 7, "b"}}, ann, {0, 1, 2, 3});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].satisfied == 2);
  CHECK(rows[1].satisfied == 2);
  CHECK(rows[2].satisfied == 1);
  CHECK(rows[2].above_threshold_pct == 50.0);
  CHECK(rows[3].satisfied == 1);
  const std::string csv = sweep_to_csv(rows);
  CHECK(csv.rfind("sigma,actions_ec1,", 0) == 0);
  CHECK(csv.find("\n2,1,50.00,0.5000,0.5000,50.00\n") != std::string::npos);
}

TEST_CASE("annotation quality statistics") {
  AnnotationSet perfect{{"d1", ready_at({{"a", {3}}})}, {"d2", ready_at({{"b", {4}}})}};
  const std::vector<ObservedTrigger> trig{{"d1", 3, "a"}, {"d2", 4, "b"}};
  QualityStats q = annotation_quality_stats(perfect, trig, "a", 0);
  CHECK(q.overall_coverage == 1.0);
  CHECK(q.annotation_coverage == 1.0);
  CHECK(q.phantom_noise_rate == 0.0);
  CHECK(q.turn_gap_mean == 0.0);
  CHECK(q.score_consistency == 0.0);
  CHECK(q.critical_miss_rate == 0.0);
  CHECK(q.high_quality_dialogues == 2);

  AnnotationSet noisy{{"d1", ready_at({{"a", {5}}, {"c", {2}}})}, {"d2", ready_at({{"b", {4}}})}};
  q = annotation_quality_stats(noisy, {{"d1", 8, "a"}, {"d2", 4, "b"}}, "a", 0);
  CHECK(q.phantom_ranges == 1);
  CHECK(q.phantom_noise_rate == doctest::Approx(1.0 / 3));
  CHECK(q.turn_gap_mean == doctest::Approx(1.5));

  q = annotation_quality_stats(noisy, {{"d1", 8, "a"}, {"d2", 3, "b"}, {"d2", 5, "z"}}, "b", 0);
  CHECK(q.missing_annotations == 1);
  CHECK(q.annotation_coverage == doctest::Approx(2.0 / 3));
  CHECK(q.overall_coverage == doctest::Approx(1.0 / 3));
  CHECK(q.critical_miss_rate == 1.0);
  for (double v : {q.overall_coverage, q.annotation_coverage, q.phantom_noise_rate, q.critical_miss_rate}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("collecting triggers and ranges from dialogues") {
  SynthOptions opt;
  opt.dialogues = 5;
  opt.seed = 3;
  const auto ds = synth_dialogues(opt);
  const auto trig = collect_triggers(ds);
  std::size_t expect = 0;
  for (const auto& d : ds) expect += d.observed_triggers ? d.observed_triggers->size() : 0;
  CHECK(trig.size() == expect);
  CHECK(collect_ranges(ds).size() == 5);
}
