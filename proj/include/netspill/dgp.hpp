#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include "netspill/copula.hpp"
#include "netspill/error.hpp"
#include "netspill/network.hpp"

namespace netspill {

// In-degree laws for synthetic networks. Uniform bounds are inclusive; the
// per-node form gives each node its own inclusive range (used by grouped
// designs where group size pins the range).
class DegreeLaw {
 public:
  static DegreeLaw uniform(long lo, long hi) {
    if (lo < 0 || hi < lo) throw InputError("degree law: bad uniform range");
    DegreeLaw law;
    law.common_ = {lo, hi};
    return law;
  }

  static DegreeLaw fixed(long k) { return uniform(k, k); }

  static DegreeLaw per_node(std::vector<std::pair<long, long>> bounds) {
    for (auto& [lo, hi] : bounds)
      if (lo < 0 || hi < lo) throw InputError("degree law: bad per-node range");
    DegreeLaw law;
    law.per_node_ = std::move(bounds);
    return law;
  }

  bool is_per_node() const { return !per_node_.empty(); }

  std::pair<long, long> bounds(std::size_t node) const {
    if (per_node_.empty()) return common_;
    if (node >= per_node_.size())
      throw InputError("degree law: node index beyond per-node table");
    return per_node_[node];
  }

  long draw(std::size_t node, std::mt19937_64& rng) const {
    auto [lo, hi] = bounds(node);
    if (lo == hi) return lo;
    return std::uniform_int_distribution<long>(lo, hi)(rng);
  }

  // P(d <= m) for the node's law.
  double prob_le(std::size_t node, long m) const {
    auto [lo, hi] = bounds(node);
    if (m < lo) return 0.0;
    if (m >= hi) return 1.0;
    return static_cast<double>(m - lo + 1) / static_cast<double>(hi - lo + 1);
  }

  // E(d | d > m); requires some mass above m.
  double mean_above(std::size_t node, long m) const {
    auto [lo, hi] = bounds(node);
    if (m >= hi) throw InputError("degree law: no mass above cutoff");
    long from = std::max(lo, m + 1);
    return 0.5 * static_cast<double>(from + hi);
  }

 private:
  std::pair<long, long> common_{0, 0};
  std::vector<std::pair<long, long>> per_node_;
};

enum class LinkWeight {
  unit,            // every link weighs 1
  inverse_degree,  // links into node i weigh 1/d_i (row-normalized binary)
};

// Random directed network: node i draws its in-degree from `law`, then picks
// that many distinct partners uniformly. With `groups`, partners come from the
// node's own group only. `unit_value` sets the weight each link carries in
// unit mode.
inline Network gen_network(std::size_t n, const DegreeLaw& law,
                           LinkWeight weight, std::mt19937_64& rng,
                           const std::vector<int>* groups = nullptr,
                           double unit_value = 1.0) {
  if (n < 2) throw InputError("gen_network: need at least two nodes");
  std::vector<std::vector<std::size_t>> pools;
  std::vector<const std::vector<std::size_t>*> pool_of(n, nullptr);
  std::vector<std::size_t> everyone(n);
  for (std::size_t i = 0; i < n; ++i) everyone[i] = i;
  if (groups != nullptr) {
    if (groups->size() != n) throw InputError("gen_network: partition length");
    int gmax = -1;
    for (int g : *groups) {
      if (g < 0) throw InputError("gen_network: negative group id");
      gmax = std::max(gmax, g);
    }
    pools.resize(static_cast<std::size_t>(gmax) + 1);
    for (std::size_t i = 0; i < n; ++i)
      pools[static_cast<std::size_t>((*groups)[i])].push_back(i);
    for (std::size_t i = 0; i < n; ++i)
      pool_of[i] = &pools[static_cast<std::size_t>((*groups)[i])];
  } else {
    for (std::size_t i = 0; i < n; ++i) pool_of[i] = &everyone;
  }

  Network net(n);
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pool = *pool_of[i];
    long d = law.draw(i, rng);
    if (d > static_cast<long>(pool.size()) - 1)
      throw InputError("gen_network: degree exceeds available partners");
    if (d == 0) continue;
    chosen.clear();
    std::size_t want = static_cast<std::size_t>(d);
    if (2 * want + 2 > pool.size()) {
      // Dense draw: partial Fisher-Yates over a copy of the pool.
      scratch.assign(pool.begin(), pool.end());
      std::size_t filled = 0;
      for (std::size_t k = 0; k < scratch.size() && filled < want; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, scratch.size() - 1);
        std::swap(scratch[k], scratch[pick(rng)]);
        if (scratch[k] == i) continue;
        chosen.push_back(scratch[k]);
        ++filled;
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      while (chosen.size() < want) {
        std::size_t j = pool[pick(rng)];
        if (j == i) continue;
        if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
        chosen.push_back(j);
      }
    }
    double w = weight == LinkWeight::unit
                   ? unit_value
                   : 1.0 / static_cast<double>(want);
    for (std::size_t j : chosen) net.add_link(i, j, w);
  }
  return net;
}

// Complete weighted network with log-normal raw weights, each row normalized
// to sum to one. `mu` and `sigma` parameterize the log-weight normal law.
inline Network gen_network_lognormal(std::size_t n, double mu, double sigma,
                                     std::mt19937_64& rng) {
  if (n < 2) throw InputError("gen_network_lognormal: need at least two nodes");
  if (!(sigma > 0.0)) throw InputError("gen_network_lognormal: sigma <= 0");
  Network net(n);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      w[j] = std::exp(mu + sigma * z(rng));
      total += w[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      net.add_link(i, j, w[j] / total);
    }
  }
  return net;
}

inline std::vector<double> gen_treatment_bernoulli(std::size_t n, double p,
                                                   std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("bernoulli: p outside [0,1]");
  std::bernoulli_distribution coin(p);
  std::vector<double> x(n);
  for (double& xi : x) xi = coin(rng) ? 1.0 : 0.0;
  return x;
}

// Treatment correlated with degree through a Gumbel copula: joint uniforms are
// drawn per node, the degree-side uniform is rank-matched to the realized
// degree sequence (ties by node id), and the x-side uniform is pushed through
// the marginal's quantile.
inline std::vector<double> gen_treatment_copula(
    const std::vector<double>& degrees, const Marginal& x_marginal,
    double theta, std::mt19937_64& rng) {
  std::size_t n = degrees.size();
  if (n == 0) throw InputError("gen_treatment_copula: empty degree sequence");
  std::vector<std::pair<double, double>> pairs(n);
  for (auto& pr : pairs) pr = gumbel_sample(theta, rng);
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (degrees[a] != degrees[b]) return degrees[a] < degrees[b];
    return a < b;
  });
  std::vector<double> x(n);
  for (std::size_t r = 0; r < n; ++r)
    x[order[r]] = x_marginal.quantile(pairs[r].first);
  return x;
}

// y = beta * (net x) + noise.
inline std::vector<double> simulate_linear(const Network& net,
                                           const std::vector<double>& x,
                                           double beta, double noise_sd,
                                           std::mt19937_64& rng) {
  if (noise_sd < 0.0) throw InputError("simulate_linear: negative noise sd");
  std::vector<double> y = spillovers(net, x);
  std::normal_distribution<double> eps(0.0, 1.0);
  for (double& yi : y) yi = beta * yi + noise_sd * eps(rng);
  return y;
}

// y = lambda * (net y) + beta * x + noise, solved by geometric series.
inline std::vector<double> simulate_sar(const Network& net,
                                        const std::vector<double>& x,
                                        double lambda, double beta,
                                        double noise_sd, std::mt19937_64& rng) {
  if (x.size() != net.size()) throw InputError("simulate_sar: length mismatch");
  if (noise_sd < 0.0) throw InputError("simulate_sar: negative noise sd");
  std::vector<double> rhs(net.size());
  std::normal_distribution<double> eps(0.0, 1.0);
  for (std::size_t i = 0; i < net.size(); ++i)
    rhs[i] = beta * x[i] + noise_sd * eps(rng);
  return neumann_solve(net, lambda, rhs);
}

}  // namespace netspill
