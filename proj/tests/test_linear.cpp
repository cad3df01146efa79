#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "netspill/dgp.hpp"
#include "netspill/error.hpp"
#include "netspill/linear.hpp"
#include "netspill/network.hpp"

using namespace netspill;

TEST_CASE("exposure slope is the through-origin moment ratio") {
  Network net(3);
  net.add_link(0, 1);
  net.add_link(0, 2);
  std::vector<double> x = {0.0, 1.0, 1.0};
  std::vector<double> y = {3.0, 5.0, 7.0};

  OlsFit fit = ols_fit(net, x, y);
  // Exposures are [2, 0, 0]: slope = (2*3) / 4, untouched by the zero rows.
  CHECK(fit.beta == Catch::Approx(1.5));
  CHECK(fit.exposure == std::vector<double>{2.0, 0.0, 0.0});
  CHECK(fit.exposure_ss == Catch::Approx(4.0));
  CHECK(fit.residuals[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(fit.residuals[1] == Catch::Approx(5.0));
  CHECK(fit.residuals[2] == Catch::Approx(7.0));

  EstimateResult est = ols_spillover(net, x, y);
  CHECK(est.estimate == Catch::Approx(1.5));
  CHECK(est.method == "ols");
  CHECK(est.diagnostics.at("exposure_ss") == Catch::Approx(4.0));
}

TEST_CASE("covariates are partialled out exactly") {
  Network ring(4);
  for (std::size_t i = 0; i < 4; ++i) ring.add_link(i, (i + 1) % 4);
  std::vector<double> x = {1.0, 0.0, 2.0, 1.0};
  std::vector<double> w = {1.0, 1.0, 2.0, 3.0};
  // Exposures are [0, 2, 1, 1]; build y with slope 1.5 on them plus 2 w.
  std::vector<double> y = {2.0, 5.0, 5.5, 7.5};
  OlsFit fit = ols_fit(ring, x, y, {w});
  CHECK(fit.beta == Catch::Approx(1.5).epsilon(1e-9));
  for (double r : fit.residuals) CHECK(r == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("degenerate exposure has no slope") {
  Network net(2);
  std::vector<double> x = {1.0, 1.0};
  CHECK_THROWS_AS(ols_fit(net, x, {1.0, 2.0}), NumericalError);
  CHECK_THROWS_AS(ols_fit(net, {1.0}, {1.0, 2.0}), InputError);
}

TEST_CASE("known bias ratio rescales the naive slope") {
  Network net(3);
  net.add_link(0, 1);
  std::vector<double> x = {0.0, 1.0, 0.0};
  std::vector<double> y = {1.2, 0.0, 0.0};
  EstimateResult ols = ols_spillover(net, x, y);
  CHECK(ols.estimate == Catch::Approx(1.2));

  EstimateResult fixed = correct_known_eta(ols, 0.5, "corrected");
  CHECK(fixed.estimate == Catch::Approx(0.8));
  CHECK(fixed.method == "corrected");
  REQUIRE(fixed.eta.has_value());
  CHECK(*fixed.eta == 0.5);

  // Zero ratio leaves the estimate alone; the pole raises.
  CHECK(correct_known_eta(ols, 0.0, "id").estimate == Catch::Approx(1.2));
  CHECK_THROWS_AS(correct_known_eta(ols, -1.0, "pole"), NumericalError);

  // Round trip: undoing the correction restores the naive value.
  CHECK(fixed.estimate * 1.5 == Catch::Approx(ols.estimate));
}

namespace {

// Four nodes, exposures [1, 1, 2, 0] under x = (1, 1, 0, 0).
struct RatioFixture {
  Network sampled{4};
  std::vector<double> x{1.0, 1.0, 0.0, 0.0};
  RatioFixture() {
    sampled.add_link(0, 1);
    sampled.add_link(1, 0);
    sampled.add_link(2, 0);
    sampled.add_link(2, 1);
  }
};

}  // namespace

TEST_CASE("independence-based bias ratio from aggregate degrees") {
  RatioFixture f;
  DegreeStats stats;
  stats.n = 4;
  stats.n_bad = 2;
  stats.d_h_bar = 1.5;
  stats.d_b_bar = 2.0;
  // share * dh * db * xbar^2 / msq = 0.5 * 1.5 * 2 * 0.25 / 1.5.
  CHECK(eta_hat_independent(f.sampled, f.x, stats) == Catch::Approx(0.25));

  stats.n_bad = 0;
  CHECK(eta_hat_independent(f.sampled, f.x, stats) == 0.0);
}

TEST_CASE("conditional bias ratio weights cells by their size") {
  RatioFixture f;
  DegreeStats stats;
  stats.n = 4;
  stats.n_bad = 3;
  stats.conditional = std::vector<ConditionalCell>{
      {1.0, 2.0, 1}, {2.0, 0.5, 2}};
  // (1/n) sum count * dh * db * xbar^2 / msq = (1/4)(2 + 2) * 0.25 / 1.5.
  CHECK(eta_hat_conditional(f.sampled, f.x, stats) ==
        Catch::Approx(1.0 / 6.0));

  DegreeStats bare;
  bare.n = 4;
  CHECK_THROWS_AS(eta_hat_conditional(f.sampled, f.x, bare), InputError);
}

TEST_CASE("capped-survey bias ratio from the degree law") {
  // Every row reports exactly 3 treated contacts, so msq = 9 and xbar = 1.
  Network sampled(6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 1; k <= 3; ++k)
      sampled.add_link(i, (i + k) % 6);
  std::vector<double> x(6, 1.0);
  DegreeLaw law = DegreeLaw::uniform(1, 15);
  // P(d > 3) * cap * (E(d | d > 3) - cap) / msq = (12/15) * 3 * 6.5 / 9.
  CHECK(eta_fixed_choice_analytic(law, 3, sampled, x) ==
        Catch::Approx(26.0 / 15.0));
  CHECK_THROWS_AS(eta_fixed_choice_analytic(law, 0, sampled, x), InputError);
}

TEST_CASE("contact-dummy contrast with an explicit reach probability") {
  Network sampled(4);
  sampled.add_link(0, 1);
  sampled.add_link(2, 1);
  std::vector<double> x = {0.0, 1.0, 0.0, 0.0};
  std::vector<double> y = {5.0, 1.0, 7.0, 3.0};

  DegreeStats stats;
  stats.n = 4;
  stats.n_bad = 2;
  stats.d_b_bar = 1.0;
  stats.treated_split = TreatedSplit{1.5, 0.5, 2, 2};

  DummyOptions opt;
  opt.p_pos_true = 0.8;
  EstimateResult r = estimate_dummy(sampled, x, y, stats, opt);
  // Group means 6 and 2 give a contrast of 4; the rescale factor is
  // ((0.5 + 0.5) / 0.8) / (0.5 / 0.5 + (1.5 - 0.5)) = 0.625.
  CHECK(r.method == "dummy_rescaled");
  CHECK(r.diagnostics.at("gamma_ols") == Catch::Approx(4.0));
  CHECK(r.diagnostics.at("rescale_factor") == Catch::Approx(0.625));
  CHECK(r.diagnostics.at("p_pos_observed") == Catch::Approx(0.5));
  CHECK(r.estimate == Catch::Approx(2.5));
}

TEST_CASE("contact-dummy reach probability defaults to the independence model") {
  Network sampled(4);
  sampled.add_link(0, 1);
  sampled.add_link(2, 1);
  std::vector<double> x = {0.0, 1.0, 0.0, 0.0};
  std::vector<double> y = {5.0, 1.0, 7.0, 3.0};

  DegreeStats stats;
  stats.n = 4;
  stats.n_bad = 2;
  stats.d_b_bar = 1.0;
  stats.treated_split = TreatedSplit{1.5, 0.5, 2, 2};

  EstimateResult r = estimate_dummy(sampled, x, y, stats);
  // 1 - mean over rows of (1 - 1/4)^(degree + 1/2) with degrees (1,0,1,0).
  double expect =
      1.0 - 0.25 * (2.0 * std::pow(0.75, 1.5) + 2.0 * std::pow(0.75, 0.5));
  CHECK(r.diagnostics.at("p_pos_true") == Catch::Approx(expect).epsilon(1e-12));

  DegreeStats no_split;
  no_split.n = 4;
  CHECK_THROWS_AS(estimate_dummy(sampled, x, y, no_split), InputError);
}

TEST_CASE("contact-dummy contrast needs both groups inhabited") {
  Network sampled(3);
  sampled.add_link(0, 1);
  sampled.add_link(1, 0);
  sampled.add_link(2, 0);
  std::vector<double> x = {1.0, 1.0, 1.0};
  DegreeStats stats;
  stats.n = 3;
  stats.treated_split = TreatedSplit{};
  CHECK_THROWS_AS(estimate_dummy(sampled, x, {1.0, 2.0, 3.0}, stats),
                  NumericalError);
}

TEST_CASE("robustness reports the bias needed to reach a target slope") {
  Network net(3);
  net.add_link(0, 1);
  std::vector<double> x = {0.0, 1.0, 0.0};
  std::vector<double> y = {1.2, 0.0, 0.0};

  DegreeStats stats;
  stats.n = 3;
  stats.n_bad = 1;
  stats.d_h_bar = 2.0;

  RobustnessOptions opt;
  opt.tau = 0.8;
  RobustnessReport rep = robustness(net, x, y, stats, opt);
  CHECK(rep.beta_ols == Catch::Approx(1.2));
  REQUIRE(rep.eta_star.has_value());
  CHECK(*rep.eta_star == Catch::Approx(0.5));
  // Inverting the independence ratio: eta * msq / (share * dh * xbar^2)
  // with msq = 1/3, share = 1/3, xbar = 1/3.
  REQUIRE(rep.d_b_star.has_value());
  CHECK(*rep.d_b_star == Catch::Approx(0.5 * (1.0 / 3.0) /
                                       ((1.0 / 3.0) * 2.0 * (1.0 / 9.0))));

  RobustnessOptions bad;
  bad.tau = 0.0;
  CHECK_THROWS_AS(robustness(net, x, y, stats, bad), InputError);
}

TEST_CASE("robustness maps a bias interval to a slope interval") {
  Network net(3);
  net.add_link(0, 1);
  std::vector<double> x = {0.0, 1.0, 0.0};
  std::vector<double> y = {1.2, 0.0, 0.0};
  DegreeStats stats;
  stats.n = 3;

  RobustnessOptions opt;
  opt.eta_range = {{0.25, 0.5}};
  RobustnessReport rep = robustness(net, x, y, stats, opt);
  REQUIRE(rep.beta_range.has_value());
  CHECK(rep.beta_range->first == Catch::Approx(0.8));
  CHECK(rep.beta_range->second == Catch::Approx(0.96));

  RobustnessOptions empty;
  empty.eta_range = {{0.5, 0.25}};
  CHECK_THROWS_AS(robustness(net, x, y, stats, empty), InputError);

  RobustnessOptions pole;
  pole.eta_range = {{-1.5, 0.5}};
  CHECK_THROWS_AS(robustness(net, x, y, stats, pole), NumericalError);
}
