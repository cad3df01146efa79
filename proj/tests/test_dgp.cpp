#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "netspill/dgp.hpp"
#include "netspill/error.hpp"
#include "netspill/network.hpp"
#include "netspill/rng.hpp"

using namespace netspill;

TEST_CASE("degree law tail quantities for a uniform range") {
  DegreeLaw law = DegreeLaw::uniform(1, 15);
  CHECK(law.prob_le(0, 0) == 0.0);
  CHECK(law.prob_le(0, 3) == Catch::Approx(3.0 / 15.0));
  CHECK(law.prob_le(0, 15) == 1.0);
  CHECK(law.prob_le(0, 40) == 1.0);
  CHECK(law.mean_above(0, 3) == Catch::Approx(9.5));
  CHECK(law.mean_above(0, 0) == Catch::Approx(8.0));
  CHECK_THROWS_AS(law.mean_above(0, 15), InputError);
  CHECK_THROWS_AS(DegreeLaw::uniform(5, 4), InputError);
  CHECK_THROWS_AS(DegreeLaw::uniform(-1, 4), InputError);
}

TEST_CASE("degenerate and per-node degree laws") {
  DegreeLaw fixed = DegreeLaw::fixed(4);
  auto rng = make_rng(1);
  for (int i = 0; i < 5; ++i) CHECK(fixed.draw(0, rng) == 4);

  DegreeLaw law = DegreeLaw::per_node({{1, 2}, {5, 5}});
  CHECK(law.is_per_node());
  CHECK(law.bounds(1) == std::pair<long, long>{5, 5});
  CHECK(law.prob_le(1, 4) == 0.0);
  CHECK_THROWS_AS(law.bounds(2), InputError);
}

TEST_CASE("generated networks respect the degree law") {
  auto rng = make_rng(11);
  DegreeLaw law = DegreeLaw::uniform(2, 4);
  Network net = gen_network(60, law, LinkWeight::unit, rng);
  auto counts = net.link_counts();
  for (std::size_t i = 0; i < net.size(); ++i) {
    CHECK(counts[i] >= 2);
    CHECK(counts[i] <= 4);
    std::set<std::size_t> seen;
    for (const Link& l : net.row(i)) {
      CHECK(l.src != i);
      CHECK(l.weight == 1.0);
      seen.insert(l.src);
    }
    CHECK(seen.size() == counts[i]);
  }
}

TEST_CASE("generated networks are reproducible from the seed") {
  auto rng1 = make_rng(5);
  auto rng2 = make_rng(5);
  DegreeLaw law = DegreeLaw::uniform(1, 3);
  Network a = gen_network(30, law, LinkWeight::unit, rng1);
  Network b = gen_network(30, law, LinkWeight::unit, rng2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.row(i) == b.row(i));
}

TEST_CASE("inverse-degree weighting normalizes each nonempty row") {
  auto rng = make_rng(2);
  DegreeLaw law = DegreeLaw::uniform(1, 6);
  Network net = gen_network(40, law, LinkWeight::inverse_degree, rng);
  auto d = net.in_degrees();
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (net.row(i).empty()) continue;
    CHECK(d[i] == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("unit weights can be rescaled globally") {
  auto rng = make_rng(2);
  Network net =
      gen_network(10, DegreeLaw::fixed(2), LinkWeight::unit, rng, nullptr, 0.1);
  for (std::size_t i = 0; i < net.size(); ++i)
    for (const Link& l : net.row(i)) CHECK(l.weight == 0.1);
}

TEST_CASE("partnered draws stay inside the node's group") {
  std::vector<int> groups(30);
  for (std::size_t i = 0; i < 30; ++i) groups[i] = i < 12 ? 0 : 1;
  auto rng = make_rng(9);
  Network net =
      gen_network(30, DegreeLaw::uniform(1, 5), LinkWeight::unit, rng, &groups);
  for (std::size_t i = 0; i < net.size(); ++i)
    for (const Link& l : net.row(i)) CHECK(groups[l.src] == groups[i]);
}

TEST_CASE("degree draws larger than the pool are rejected") {
  auto rng = make_rng(1);
  CHECK_THROWS_AS(
      gen_network(4, DegreeLaw::fixed(4), LinkWeight::unit, rng), InputError);
  CHECK_THROWS_AS(
      gen_network(1, DegreeLaw::fixed(0), LinkWeight::unit, rng), InputError);
}

TEST_CASE("lognormal networks are complete with unit row sums") {
  auto rng = make_rng(4);
  Network net = gen_network_lognormal(12, 1.0, 2.0, rng);
  auto d = net.in_degrees();
  for (std::size_t i = 0; i < net.size(); ++i) {
    CHECK(net.row(i).size() == 11);
    CHECK(d[i] == Catch::Approx(1.0).margin(1e-12));
    for (const Link& l : net.row(i)) CHECK(l.weight > 0.0);
  }
  CHECK_THROWS_AS(gen_network_lognormal(12, 1.0, 0.0, rng), InputError);
  CHECK_THROWS_AS(gen_network_lognormal(1, 1.0, 2.0, rng), InputError);
}

TEST_CASE("bernoulli treatment is binary with the right frequency") {
  auto rng = make_rng(6);
  std::vector<double> x = gen_treatment_bernoulli(4000, 0.3, rng);
  double sum = 0.0;
  for (double xi : x) {
    CHECK((xi == 0.0 || xi == 1.0));
    sum += xi;
  }
  CHECK(sum / 4000.0 == Catch::Approx(0.3).margin(0.03));
  CHECK_THROWS_AS(gen_treatment_bernoulli(10, 1.5, rng), InputError);
}

namespace {

// Concordance share over pairs with distinct values on both coordinates.
double concordance(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a[i] == a[j] || b[i] == b[j]) continue;
      ++total;
      if ((a[i] < a[j]) == (b[i] < b[j])) ++agree;
    }
  return static_cast<double>(agree) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("copula treatment tracks the degree sequence when dependence is strong") {
  std::vector<double> degrees(220);
  for (std::size_t i = 0; i < degrees.size(); ++i)
    degrees[i] = static_cast<double>(i % 11);
  auto rng = make_rng(13);
  std::vector<double> x =
      gen_treatment_copula(degrees, Marginal::normal(5.0, 1.0), 10.0, rng);
  REQUIRE(x.size() == degrees.size());
  for (double xi : x) CHECK(std::isfinite(xi));
  CHECK(concordance(degrees, x) > 0.85);
}

TEST_CASE("copula treatment decouples from degrees at independence") {
  std::vector<double> degrees(220);
  for (std::size_t i = 0; i < degrees.size(); ++i)
    degrees[i] = static_cast<double>(i % 11);
  auto rng = make_rng(13);
  std::vector<double> x =
      gen_treatment_copula(degrees, Marginal::normal(5.0, 1.0), 1.0, rng);
  CHECK(concordance(degrees, x) == Catch::Approx(0.5).margin(0.08));
  CHECK_THROWS_AS(
      gen_treatment_copula({}, Marginal::normal(5.0, 1.0), 1.0, rng),
      InputError);
}

TEST_CASE("linear outcomes without noise equal the scaled exposure") {
  Network net(3);
  net.add_link(0, 1);
  net.add_link(0, 2);
  net.add_link(1, 2);
  std::vector<double> x = {0.0, 1.0, 1.0};
  auto rng = make_rng(1);
  std::vector<double> y = simulate_linear(net, x, 0.8, 0.0, rng);
  CHECK(y == std::vector<double>{1.6, 0.8, 0.0});
  CHECK_THROWS_AS(simulate_linear(net, x, 0.8, -1.0, rng), InputError);
}

TEST_CASE("autoregressive outcomes solve the feedback fixed point") {
  Network net(2);
  net.add_link(0, 1);
  net.add_link(1, 0);
  std::vector<double> x = {1.0, 0.0};
  auto rng = make_rng(1);
  std::vector<double> y = simulate_sar(net, x, 0.4, 1.0, 0.0, rng);
  // Closed form for the two-node cycle: y0 = (x0 + l x1) / (1 - l^2).
  CHECK(y[0] == Catch::Approx(1.0 / 0.84).epsilon(1e-9));
  CHECK(y[1] == Catch::Approx(0.4 / 0.84).epsilon(1e-9));

  std::vector<double> y0 = simulate_sar(net, x, 0.0, 0.8, 0.0, rng);
  CHECK(y0[0] == Catch::Approx(0.8));
  CHECK(y0[1] == Catch::Approx(0.0).margin(1e-15));
  CHECK_THROWS_AS(simulate_sar(net, x, 0.4, 1.0, -0.1, rng), InputError);
}
