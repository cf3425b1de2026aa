#include <doctest.h>

#include <cmath>

#include "prosched/records.hpp"
#include "prosched/ranking.hpp"
#include "testkit.hpp"

using namespace prosched;

namespace {

ModelRow random_row(testkit::Rng& rng, const std::string& id) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {id, u(rng), u(rng), u(rng) * 3, u(rng), u(rng), u(rng)};
}

std::vector<std::string> top_ids(const std::vector<RankedEntry>& ranked, int k) {
  std::vector<std::string> out;
  for (int i = 0; i < k && i < static_cast<int>(ranked.size()); ++i) out.push_back(ranked[static_cast<std::size_t>(i)].result.model_id);
  return out;
}

}  // namespace

TEST_CASE("min-max normalization") {
  CHECK(minmax_normalize({2, 4, 6}) == std::vector<double>{0, 0.5, 1});
  CHECK(minmax_normalize({3, 3, 3}) == std::vector<double>{0.5, 0.5, 0.5});
  CHECK(minmax_normalize({7}) == std::vector<double>{0.5});
  CHECK_THROWS(minmax_normalize({}));
}

TEST_CASE("harmonic mean of the indices") {
  CHECK(pri_from_indices(0.8, 0.8) == doctest::Approx(0.8));
  CHECK(pri_from_indices(1.0, 0.6) == doctest::Approx(0.75));
  CHECK(pri_from_indices(1.0, 0.1) == doctest::Approx(0.2 / 1.1));
  CHECK(pri_from_indices(0.0, 0.0) == doctest::Approx(kPriFloor));
}

TEST_CASE("harmonic mean is symmetric and bounded by the arithmetic mean") {
  testkit::Rng rng(3);
  std::uniform_real_distribution<double> u(kPriFloor, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double ci = u(rng), ti = i % 10 == 0 ? ci : u(rng);
    CHECK(pri_from_indices(ci, ti) == pri_from_indices(ti, ci));
    const double am = (ci + ti) / 2;
    if (ci == ti) CHECK(pri_from_indices(ci, ti) == doctest::Approx(am).epsilon(1e-14));
    else CHECK(pri_from_indices(ci, ti) < am);
  }
}

TEST_CASE("compute_pri combines normalized metrics") {
  const std::vector<ModelRow> rows{{"best", 0.9, 0.95, 0.05, 0.9, 0.1, 0.9}, {"worst", 0.1, 0.2, 1.0, 0.1, 0.9, 0.1}};
  const auto res = compute_pri(rows);
  REQUIRE(res.size() == 2);
  CHECK(res[0].ci == doctest::Approx(1.0));
  CHECK(res[0].ti == doctest::Approx(1.0));
  CHECK(res[0].pri == doctest::Approx(1.0));
  CHECK(res[1].ci == doctest::Approx(kPriFloor));
  CHECK(res[1].pri == doctest::Approx(kPriFloor));
  CHECK(res[0].normalized.at("Difference") == 0.0);

  std::vector<ModelRow> bad = rows;
  bad[1].pt = std::nan("");
  CHECK_THROWS_WITH(compute_pri(bad), doctest::Contains("worst"));
}

TEST_CASE("PRI is invariant under positive affine rescaling of a column") {
  testkit::Rng rng(8);
  std::uniform_real_distribution<double> scale(0.1, 10.0), shift(-5.0, 5.0);
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<ModelRow> rows;
    for (int i = 0; i < testkit::pick(rng, 2, 8); ++i) rows.push_back(random_row(rng, "m" + std::to_string(i)));
    const double a = scale(rng), b = shift(rng);
    const int col = testkit::pick(rng, 0, 5);
    std::vector<ModelRow> scaled = rows;
    for (ModelRow& r : scaled) {
      double* f[] = {&r.ac, &r.max_ac, &r.difference, &r.pt, &r.ftr, &r.rar};
      *f[col] = a * *f[col] + b;
    }
    const auto p1 = compute_pri(rows), p2 = compute_pri(scaled);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(p1[i].pri == doctest::Approx(p2[i].pri).epsilon(1e-9));
      CHECK(p1[i].pri >= 0.0);
      CHECK(p1[i].pri <= 1.0);
    }
  }
}

TEST_CASE("a dominated row keeps the order of every normalized column") {
  testkit::Rng rng(12);
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<ModelRow> rows;
    for (int i = 0; i < testkit::pick(rng, 2, 6); ++i) rows.push_back(random_row(rng, "m" + std::to_string(i)));
    std::vector<ModelRow> extended = rows;
    extended.push_back({"dominated", -1, -1, 10, -1, 2, -1});
    const auto p1 = compute_pri(rows), p2 = compute_pri(extended);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < rows.size(); ++j) {
        for (const auto& [m, v] : p1[i].normalized) {
          if (v < p1[j].normalized.at(m)) CHECK(p2[i].normalized.at(m) < p2[j].normalized.at(m));
        }
      }
    }
  }
}

TEST_CASE("rank_group orders, marks and flags ties") {
  PriResult a{"a", 0, 0, 0.5, {}}, b{"b", 0, 0, 0.7, {}};
  auto ranked = rank_group({a, b});
  CHECK(ranked[0].result.model_id == "b");
  CHECK(ranked[0].marker == "(1)");
  CHECK(ranked[1].marker == "(2)");
  CHECK_FALSE(ranked[0].tied);

  PriResult c{"z", 0, 0, 0.6, {}}, d{"y", 0, 0, 0.6, {}};
  ranked = rank_group({c, d});
  CHECK(ranked[0].result.model_id == "y");
  CHECK(ranked[0].tied);
  CHECK(ranked[1].tied);

  std::vector<PriResult> many;
  for (int i = 0; i < 6; ++i) many.push_back({"m" + std::to_string(i), 0, 0, i / 10.0, {}});
  ranked = rank_group(many);
  CHECK(ranked[3].marker == "(4)");
  CHECK(ranked[4].marker.empty());
}

TEST_CASE("published comparison groups reproduce the top-4 markers") {
  const auto abcd = read_model_rows_csv(read_file(testkit::data_path("group_abcd.csv")));
  CHECK(abcd.size() == 14);
  CHECK(top_ids(rank_group(compute_pri(abcd)), 4) ==
        std::vector<std::string>{"rl-q4-custom-ruler", "rl-q4-adaptive-ruler", "claude-4-reasoning",
                                 "gemini-2.5-flash-nonreasoning"});
  const auto loan = read_model_rows_csv(read_file(testkit::data_path("group_home_loan.csv")));
  CHECK(top_ids(rank_group(compute_pri(loan)), 4) ==
        std::vector<std::string>{"gemini-2.5-flash-reasoning", "claude-4-reasoning-asg", "claude-4-reasoning",
                                 "rl-q4-adaptive-ruler"});
}

TEST_CASE("model table parsing") {
  const auto rows = read_model_rows_csv("# comment\nModel_ID,AC,MaxAC,Difference,PT,FTR,RAR,extra\nx,0.1,0.2,1,0.3,0.4,0.5,zz\n");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].rar == 0.5);
  CHECK_THROWS_WITH(read_model_rows_csv("model_id,AC\n"), doctest::Contains("missing column"));
  CHECK_THROWS_WITH(read_model_rows_csv("model_id,ac,maxac,difference,pt,ftr,rar\nx,a,1,1,1,1,1\n"),
                    doctest::Contains("bad number"));
  const std::string csv = ranked_to_csv(rank_group(compute_pri({{"a,b", 1, 1, 0, 1, 0, 1}, {"c", 0, 0, 1, 0, 1, 0}})));
  CHECK(csv.find("1,(1),\"a,b\",1.0000,1.0000,1.0000,false") != std::string::npos);
}

TEST_CASE("run consistency") {
  const RunSeries s1{"AC", {{0, 0.1}, {1, 0.3}, {2, 0.9}}};
  auto rc = run_consistency({s1}, {s1});
  CHECK(rc.c_final.at("AC") == 1.0);
  CHECK(rc.c_trajectory.at("AC") == doctest::Approx(1.0));
  CHECK(*rc.c_combined == doctest::Approx(1.0));

  rc = run_consistency({{"AC", {{0, 0.5}, {1, 0.9}}}}, {{"AC", {{0, 0.4}, {1, 1.1}}}});
  CHECK(rc.c_final.at("AC") == doctest::Approx(0.9));

  rc = run_consistency({{"AC", {{0, 1}, {1, -1}, {2, 0}}}}, {{"AC", {{0, -1}, {1, 1}, {2, 0}}}});
  CHECK(rc.c_trajectory.at("AC") == doctest::Approx(-1.0));

  rc = run_consistency({{"PT", {{0, 0.2}, {1, 0.2}}}}, {{"PT", {{0, 0.1}, {1, 0.3}}}});
  CHECK(rc.c_trajectory.empty());
  CHECK(rc.warnings.size() == 1);
  CHECK(rc.c_combined.has_value());

  CHECK_THROWS(run_consistency({s1}, {}));
  CHECK_THROWS(run_consistency({{"AC", {{1, 0}, {1, 0}}}}, {{"AC", {{0, 0}}}}));
}

TEST_CASE("average metric gradient") {
  CHECK(avg_metric_gradient({"x", {{0, 0.1}, {1, 0.2}, {2, 0.4}}}) == doctest::Approx(0.15));
  CHECK(avg_metric_gradient({"x", {{0, 0.3}, {1, 0.3}}}) == 0.0);
  CHECK(avg_metric_gradient({"x", {{0, 0.1}, {3, 0.2}, {9, 0.25}}}) > 0.0);
  CHECK_THROWS(avg_metric_gradient({"x", {{0, 1}}}));
}
