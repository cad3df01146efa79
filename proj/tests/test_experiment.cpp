#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netspill/error.hpp"
#include "netspill/experiment.hpp"

using namespace netspill;

TEST_CASE("design names round trip") {
  for (DesignKind k :
       {DesignKind::case1, DesignKind::case2, DesignKind::case3,
        DesignKind::case4, DesignKind::case5, DesignKind::copula_case,
        DesignKind::sar_case1, DesignKind::sar_case2})
    CHECK(design_from_name(design_name(k)) == k);
  CHECK_THROWS_AS(design_from_name("case99"), InputError);
}

TEST_CASE("defaults fill in per-design sweeps and estimators") {
  ExperimentConfig c1;
  c1.design = DesignKind::case1;
  detail::fill_design_defaults(c1);
  CHECK(c1.sweep == std::vector<double>{3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(c1.estimators ==
        std::vector<std::string>{"ols", "eta_oracle", "eta_indep"});

  ExperimentConfig c3;
  c3.design = DesignKind::case3;
  detail::fill_design_defaults(c3);
  // Thresholds sweep from fine to coarse.
  CHECK(c3.sweep ==
        std::vector<double>{0.025, 0.05, 0.075, 0.1, 0.12, 0.15, 0.175, 0.2});
  for (std::size_t i = 1; i < c3.sweep.size(); ++i)
    CHECK(c3.sweep[i] > c3.sweep[i - 1]);

  ExperimentConfig cc;
  cc.design = DesignKind::copula_case;
  cc.cap = 5;
  detail::fill_design_defaults(cc);
  CHECK(cc.sweep == std::vector<double>{5.0});
}

TEST_CASE("config survives a json round trip") {
  ExperimentConfig c;
  c.design = DesignKind::case2;
  c.n = 500;
  c.reps = 7;
  c.seed = 12345;
  c.representative_sweep = 3.0;
  detail::fill_design_defaults(c);

  ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json().dump() == c.to_json().dump());

  nlohmann::json bad = c.to_json();
  bad["design"] = "nope";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), InputError);
  nlohmann::json tiny = c.to_json();
  tiny["n"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(tiny), InputError);
}

TEST_CASE("group layout covers the canonical node count") {
  detail::GroupLayout g = detail::make_group_layout(1000);
  CHECK(g.groups.size() == 1000);
  CHECK(g.group_size.size() == 50);
  long total = 0;
  for (long s : g.group_size) total += s;
  CHECK(total == 1000);
  CHECK(g.group_size.front() == 25);
  CHECK(g.group_size.back() == 15);

  detail::GroupLayout small = detail::make_group_layout(60);
  CHECK(small.groups.size() == 60);
  CHECK(small.group_size.back() == 10);  // last group truncated

  CHECK_THROWS_AS(detail::make_group_layout(1200), InputError);
}

TEST_CASE("summary statistics by hand") {
  auto [m, sd] = mean_sd({1.0, 2.0, 3.0, 4.0});
  CHECK(m == Catch::Approx(2.5));
  CHECK(sd == Catch::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(mean_sd({}).first == 0.0);
  CHECK(mean_sd({7.0}).first == 7.0);
  CHECK(mean_sd({7.0}).second == 0.0);
}

namespace {

ExperimentConfig tiny_case1() {
  ExperimentConfig cfg;
  cfg.design = DesignKind::case1;
  cfg.n = 200;
  cfg.reps = 4;
  cfg.seed = 31;
  cfg.sweep = {5};
  detail::fill_design_defaults(cfg);
  return cfg;
}

}  // namespace

TEST_CASE("sweeps are reproducible from the seed") {
  ExperimentConfig cfg = tiny_case1();
  ExperimentResult a = run_experiment(cfg);
  ExperimentResult b = run_experiment(cfg);
  REQUIRE(a.cells.size() == 1);
  CHECK(a.content_hash == b.content_hash);
  CHECK(a.cells[0].estimates == b.cells[0].estimates);
  CHECK(a.cells[0].estimates.count("ols") == 1);
  CHECK(a.cells[0].estimates.count("eta_oracle") == 1);
  CHECK(a.cells[0].estimates.at("ols").size() == 4);

  ExperimentConfig other = cfg;
  other.seed = 32;
  ExperimentResult c = run_experiment(other);
  CHECK(a.content_hash != c.content_hash);
  CHECK(a.cells[0].estimates.at("ols") != c.cells[0].estimates.at("ols"));
}

TEST_CASE("results do not depend on the thread count") {
  ExperimentConfig cfg = tiny_case1();
  cfg.reps = 6;
  ExperimentResult one = run_experiment(cfg, 1);
  ExperimentResult two = run_experiment(cfg, 2);
  CHECK(one.cells[0].estimates == two.cells[0].estimates);
  CHECK(one.cells[0].failures == two.cells[0].failures);
}

TEST_CASE("the naive slope sits above the corrected one under missing links") {
  ExperimentConfig cfg = tiny_case1();
  cfg.sweep = {3};
  ExperimentResult r = run_experiment(cfg);
  double ols = mean_sd(r.cells[0].estimates.at("ols")).first;
  double fixed = mean_sd(r.cells[0].estimates.at("eta_oracle")).first;
  CHECK(ols > fixed);
  CHECK(fixed == Catch::Approx(0.8).margin(0.25));
}

TEST_CASE("tables land on disk and echo the run") {
  ExperimentConfig cfg = tiny_case1();
  ExperimentResult r = run_experiment(cfg);

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "netspill_test_tables";
  fs::remove_all(dir);
  emit_tables(r, dir.string());

  CHECK(fs::exists(dir / "case1_table.csv"));
  CHECK(fs::exists(dir / "case1_sd.csv"));
  CHECK(fs::exists(dir / "case1_hist.csv"));
  CHECK(fs::exists(dir / "case1_meta.json"));

  std::ifstream meta(dir / "case1_meta.json");
  nlohmann::json j;
  meta >> j;
  CHECK(j.at("content_hash").get<std::string>() == r.content_hash);
  REQUIRE(j.at("cells").size() == 1);
  auto [m, sd] = mean_sd(r.cells[0].estimates.at("ols"));
  CHECK(j["cells"][0]["mean"]["ols"].get<double>() == Catch::Approx(m));
  CHECK(j["cells"][0]["sd"]["ols"].get<double>() == Catch::Approx(sd));
  CHECK(j["cells"][0]["count"]["ols"].get<int>() == 4);

  // The summary table header lists the estimator series.
  std::ifstream table(dir / "case1_table.csv");
  std::string header;
  std::getline(table, header);
  CHECK(header == "sweep,eta_indep,eta_oracle,ols");
  std::string row;
  std::getline(table, row);
  CHECK(row.substr(0, 2) == "5,");
  fs::remove_all(dir);
}

TEST_CASE("every design runs end to end at a small size") {
  for (DesignKind k :
       {DesignKind::case2, DesignKind::case3, DesignKind::case4,
        DesignKind::case5, DesignKind::copula_case, DesignKind::sar_case1,
        DesignKind::sar_case2}) {
    ExperimentConfig cfg;
    cfg.design = k;
    cfg.n = k == DesignKind::case3 ? 60 : 200;
    cfg.reps = 2;
    cfg.seed = 77;
    detail::fill_design_defaults(cfg);
    cfg.sweep = {cfg.sweep.front()};
    ExperimentResult r = run_experiment(cfg);
    REQUIRE(r.cells.size() == 1);
    CHECK_FALSE(r.cells[0].estimates.empty());
    for (const auto& [name, v] : r.cells[0].estimates) {
      for (double val : v) CHECK(std::isfinite(val));
    }
  }
}
