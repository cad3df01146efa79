#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "netspill/copula.hpp"
#include "netspill/dgp.hpp"
#include "netspill/error.hpp"
#include "netspill/inference.hpp"
#include "netspill/io.hpp"
#include "netspill/linear.hpp"
#include "netspill/network.hpp"
#include "netspill/rng.hpp"
#include "netspill/sampling.hpp"
#include "netspill/sar.hpp"

namespace netspill {

// Named simulation designs. The first five sweep a linear spillover model
// over increasingly coarse observation rules; the copula design correlates
// treatment with degree; the last two use the autoregressive outcome.
enum class DesignKind {
  case1,        // binary links, capped survey, sweep over the cap
  case2,        // group-local links, membership survey, sweep over sparsity
  case3,        // dense weighted links, threshold survey, sweep over threshold
  case4,        // row-normalized links, capped survey, sweep over the cap
  case5,        // group-local links thinned by group size, membership survey
  copula_case,  // treatment correlated with degree, capped survey
  sar_case1,    // autoregressive outcome, capped survey
  sar_case2,    // autoregressive outcome, padded survey
};

inline std::string design_name(DesignKind k) {
  switch (k) {
    case DesignKind::case1: return "case1";
    case DesignKind::case2: return "case2";
    case DesignKind::case3: return "case3";
    case DesignKind::case4: return "case4";
    case DesignKind::case5: return "case5";
    case DesignKind::copula_case: return "copula_case";
    case DesignKind::sar_case1: return "sar_case1";
    case DesignKind::sar_case2: return "sar_case2";
  }
  return "unknown";
}

inline DesignKind design_from_name(const std::string& s) {
  for (DesignKind k :
       {DesignKind::case1, DesignKind::case2, DesignKind::case3,
        DesignKind::case4, DesignKind::case5, DesignKind::copula_case,
        DesignKind::sar_case1, DesignKind::sar_case2})
    if (design_name(k) == s) return k;
  throw InputError("unknown design '" + s + "'");
}

struct ExperimentConfig {
  DesignKind design = DesignKind::case1;
  std::size_t n = 1000;
  int reps = 1000;
  std::uint64_t seed = 0;
  std::vector<double> sweep;
  std::vector<std::string> estimators;
  double beta = 0.8;
  double noise_sd = 1.0;
  double treatment_p = 0.3;
  double lambda = 0.3;      // autoregressive designs
  double link_weight = 0.1; // autoregressive designs
  int instrument_k = 2;
  double theta = 10.0;      // copula design
  double x_mean = 5.0;
  double x_sd = 1.0;
  long cap = 5;             // copula design survey cap
  double lognormal_mu = 1.0;
  double lognormal_sigma_sq = 4.0;
  std::optional<double> representative_sweep;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

namespace detail {

inline void fill_design_defaults(ExperimentConfig& c) {
  if (c.sweep.empty()) {
    switch (c.design) {
      case DesignKind::case1:
      case DesignKind::case4:
        c.sweep = {3, 4, 5, 6, 7, 8, 9, 10};
        break;
      case DesignKind::case2:
      case DesignKind::case5:
        c.sweep = {1, 2, 3, 4, 5};
        break;
      case DesignKind::case3:
        c.sweep = {0.025, 0.05, 0.075, 0.1, 0.12, 0.15, 0.175, 0.2};
        break;
      case DesignKind::copula_case:
        c.sweep = {static_cast<double>(c.cap)};
        break;
      case DesignKind::sar_case1:
        c.sweep = {5};
        break;
      case DesignKind::sar_case2:
        c.sweep = {10};
        break;
    }
  }
  if (c.estimators.empty()) {
    switch (c.design) {
      case DesignKind::case1:
      case DesignKind::case2:
      case DesignKind::case3:
        c.estimators = {"ols", "eta_oracle", "eta_indep"};
        break;
      case DesignKind::case4:
      case DesignKind::case5:
        c.estimators = {"ols", "eta_oracle", "eta_cond"};
        break;
      case DesignKind::copula_case:
        c.estimators = {"ols", "eta_oracle", "eta_copula"};
        break;
      case DesignKind::sar_case1:
      case DesignKind::sar_case2:
        c.estimators = {"naive", "feasible", "oracle"};
        break;
    }
  }
  if (!c.representative_sweep) {
    switch (c.design) {
      case DesignKind::case1:
      case DesignKind::case4:
        c.representative_sweep = 5;
        break;
      case DesignKind::case2:
      case DesignKind::case5:
        c.representative_sweep = 3;
        break;
      case DesignKind::case3:
        c.representative_sweep = 0.1;
        break;
      default:
        c.representative_sweep = c.sweep.front();
        break;
    }
  }
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.design = design_from_name(j.at("design").get<std::string>());
    c.n = j.value("n", c.n);
    c.reps = j.value("reps", c.reps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("sweep")) c.sweep = j.at("sweep").get<std::vector<double>>();
    if (j.contains("estimators"))
      c.estimators = j.at("estimators").get<std::vector<std::string>>();
    c.beta = j.value("beta", c.beta);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.treatment_p = j.value("treatment_p", c.treatment_p);
    c.lambda = j.value("lambda", c.lambda);
    c.link_weight = j.value("link_weight", c.link_weight);
    c.instrument_k = j.value("instrument_k", c.instrument_k);
    c.theta = j.value("theta", c.theta);
    c.x_mean = j.value("x_mean", c.x_mean);
    c.x_sd = j.value("x_sd", c.x_sd);
    c.cap = j.value("cap", c.cap);
    c.lognormal_mu = j.value("lognormal_mu", c.lognormal_mu);
    c.lognormal_sigma_sq = j.value("lognormal_sigma_sq", c.lognormal_sigma_sq);
    if (j.contains("representative_sweep"))
      c.representative_sweep = j.at("representative_sweep").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (c.n < 2) throw InputError("config: n too small");
  if (c.reps < 1) throw InputError("config: reps must be >= 1");
  detail::fill_design_defaults(c);
  if (c.sweep.empty()) throw InputError("config: empty sweep");
  return c;
}

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["design"] = design_name(design);
  j["n"] = n;
  j["reps"] = reps;
  j["seed"] = seed;
  j["sweep"] = sweep;
  j["estimators"] = estimators;
  j["beta"] = beta;
  j["noise_sd"] = noise_sd;
  j["treatment_p"] = treatment_p;
  j["lambda"] = lambda;
  j["link_weight"] = link_weight;
  j["instrument_k"] = instrument_k;
  j["theta"] = theta;
  j["x_mean"] = x_mean;
  j["x_sd"] = x_sd;
  j["cap"] = cap;
  j["lognormal_mu"] = lognormal_mu;
  j["lognormal_sigma_sq"] = lognormal_sigma_sq;
  if (representative_sweep) j["representative_sweep"] = *representative_sweep;
  return j;
}

struct CellResult {
  double sweep = 0.0;
  std::map<std::string, std::vector<double>> estimates;  // successful reps
  std::map<std::string, std::size_t> failures;
};

struct ExperimentResult {
  nlohmann::json config_echo;
  std::string content_hash;
  std::vector<CellResult> cells;
};

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double a : v) m += a;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double a : v) ss += (a - m) * (a - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

namespace detail {

// Group layout shared by the membership designs: 20 groups of 25, 10 of 20,
// 20 of 15 (append pattern until n nodes are covered; the canonical n=1000
// uses the exact layout).
struct GroupLayout {
  std::vector<int> groups;      // node -> group
  std::vector<long> group_size; // group -> size
};

inline GroupLayout make_group_layout(std::size_t n) {
  GroupLayout g;
  std::vector<long> sizes;
  for (int r = 0; r < 20; ++r) sizes.push_back(25);
  for (int r = 0; r < 10; ++r) sizes.push_back(20);
  for (int r = 0; r < 20; ++r) sizes.push_back(15);
  std::size_t covered = 0;
  int gid = 0;
  for (long s : sizes) {
    if (covered >= n) break;
    long take = std::min<long>(s, static_cast<long>(n - covered));
    g.group_size.push_back(take);
    for (long t = 0; t < take; ++t) g.groups.push_back(gid);
    covered += static_cast<std::size_t>(take);
    ++gid;
  }
  if (covered < n)
    throw InputError("group designs support n <= 1000");
  return g;
}

struct RepOutput {
  std::map<std::string, double> values;
  std::map<std::string, std::size_t> failures;
};

template <typename F>
void run_estimator(RepOutput& out, const std::string& name, F&& f) {
  try {
    f();
  } catch (const NumericalError&) {
    out.failures[name] += 1;
  }
}

inline bool wants(const ExperimentConfig& cfg, const std::string& name) {
  return std::find(cfg.estimators.begin(), cfg.estimators.end(), name) !=
         cfg.estimators.end();
}

inline RepOutput run_rep_linear(const ExperimentConfig& cfg, double sweep_v,
                                std::size_t cell, std::size_t rep,
                                const GroupLayout* layout) {
  std::mt19937_64 rng_net = make_rng(cfg.seed, cell, rep, Stream::network);
  std::mt19937_64 rng_x = make_rng(cfg.seed, cell, rep, Stream::treatment);
  std::mt19937_64 rng_eps = make_rng(cfg.seed, cell, rep, Stream::noise);
  std::mt19937_64 rng_samp = make_rng(cfg.seed, cell, rep, Stream::sampling);

  Network truth;
  SamplingRule rule = FixedChoice{};
  DegreeLaw law = DegreeLaw::uniform(1, 15);
  bool have_law = false;

  switch (cfg.design) {
    case DesignKind::case1: {
      law = DegreeLaw::uniform(1, 15);
      have_law = true;
      truth = gen_network(cfg.n, law, LinkWeight::unit, rng_net);
      rule = FixedChoice{static_cast<std::size_t>(sweep_v),
                         FixedChoice::Order::uniform_random};
      break;
    }
    case DesignKind::case4: {
      law = DegreeLaw::uniform(1, 15);
      have_law = true;
      truth = gen_network(cfg.n, law, LinkWeight::inverse_degree, rng_net);
      rule = FixedChoice{static_cast<std::size_t>(sweep_v),
                         FixedChoice::Order::uniform_random};
      break;
    }
    case DesignKind::case2:
    case DesignKind::case5: {
      long k = static_cast<long>(sweep_v);
      std::vector<std::pair<long, long>> bounds(cfg.n);
      for (std::size_t i = 0; i < cfg.n; ++i) {
        long s = layout->group_size[static_cast<std::size_t>(layout->groups[i])];
        long lo, hi;
        if (cfg.design == DesignKind::case2) {
          lo = s - 5 - k;
          hi = s - k;
        } else if (s >= 25) {
          lo = 20 - 3 * k;
          hi = 25 - 3 * k;
        } else if (s >= 20) {
          lo = 15 - 2 * k;
          hi = 20 - 2 * k;
        } else {
          lo = 10 - k;
          hi = 15 - k;
        }
        bounds[i] = {lo, hi};
      }
      law = DegreeLaw::per_node(std::move(bounds));
      have_law = true;
      truth = gen_network(cfg.n, law, LinkWeight::unit, rng_net,
                          &layout->groups);
      rule = GroupMembership{layout->groups};
      break;
    }
    case DesignKind::case3: {
      truth = gen_network_lognormal(cfg.n, cfg.lognormal_mu,
                                    std::sqrt(cfg.lognormal_sigma_sq), rng_net);
      rule = WeightThreshold{sweep_v};
      break;
    }
    case DesignKind::copula_case: {
      law = DegreeLaw::uniform(0, 10);
      have_law = true;
      truth = gen_network(cfg.n, law, LinkWeight::unit, rng_net);
      rule = FixedChoice{static_cast<std::size_t>(cfg.cap),
                         FixedChoice::Order::uniform_random};
      break;
    }
    default:
      throw InputError("run_rep_linear: not a linear design");
  }

  std::vector<double> x;
  if (cfg.design == DesignKind::copula_case) {
    std::vector<double> degrees(cfg.n);
    std::vector<std::size_t> counts = truth.link_counts();
    for (std::size_t i = 0; i < cfg.n; ++i)
      degrees[i] = static_cast<double>(counts[i]);
    x = gen_treatment_copula(degrees, Marginal::normal(cfg.x_mean, cfg.x_sd),
                             cfg.theta, rng_x);
  } else {
    x = gen_treatment_bernoulli(cfg.n, cfg.treatment_p, rng_x);
  }
  std::vector<double> y =
      simulate_linear(truth, x, cfg.beta, cfg.noise_sd, rng_eps);
  Network sampled = apply_sampling(rule, truth, rng_samp);
  Decomposition dec = decompose(truth, sampled);

  RepOutput out;
  EstimateResult ols;
  try {
    ols = ols_spillover(sampled, x, y);
  } catch (const NumericalError&) {
    for (const std::string& name : cfg.estimators) out.failures[name] += 1;
    return out;
  }
  if (wants(cfg, "ols")) out.values["ols"] = ols.estimate;

  if (wants(cfg, "eta_oracle")) {
    run_estimator(out, "eta_oracle", [&] {
      std::vector<double> sh = spillovers(sampled, x);
      std::vector<double> sb = spillovers(dec.missing, x);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < cfg.n; ++i) {
        num += sh[i] * sb[i];
        den += sh[i] * sh[i];
      }
      if (!(den > 0.0)) throw NumericalError("degenerate exposure");
      out.values["eta_oracle"] =
          correct_known_eta(ols, num / den, "eta_oracle").estimate;
    });
  }
  if (wants(cfg, "eta_indep")) {
    run_estimator(out, "eta_indep", [&] {
      DegreeStats stats = degree_stats(sampled, dec);
      double eta = eta_hat_independent(sampled, x, stats);
      out.values["eta_indep"] = correct_known_eta(ols, eta, "eta_indep").estimate;
    });
  }
  if (wants(cfg, "eta_cond")) {
    run_estimator(out, "eta_cond", [&] {
      DegreeStatsOptions opt;
      opt.conditional = true;
      DegreeStats stats = degree_stats(sampled, dec, opt);
      double eta = eta_hat_conditional(sampled, x, stats);
      out.values["eta_cond"] = correct_known_eta(ols, eta, "eta_cond").estimate;
    });
  }
  if (wants(cfg, "eta_analytic") && have_law) {
    run_estimator(out, "eta_analytic", [&] {
      double eta = eta_fixed_choice_analytic(law, static_cast<long>(sweep_v),
                                             sampled, x);
      out.values["eta_analytic"] =
          correct_known_eta(ols, eta, "eta_analytic").estimate;
    });
  }
  if (wants(cfg, "eta_copula")) {
    run_estimator(out, "eta_copula", [&] {
      // Fit dependence on the nodes whose reported links are surely complete,
      // then extrapolate the missing exposure of the capped nodes.
      std::vector<std::size_t> counts = sampled.link_counts();
      std::vector<double> xs, ds;
      for (std::size_t i = 0; i < cfg.n; ++i)
        if (counts[i] < static_cast<std::size_t>(cfg.cap)) {
          xs.push_back(x[i]);
          ds.push_back(static_cast<double>(counts[i]));
        }
      CopulaModel model = fit_gumbel(xs, ds);
      model.x_marginal = Marginal::normal(cfg.x_mean, cfg.x_sd);
      model.d_marginal = Marginal::discrete_uniform(0, 10);
      double eta = eta_hat_copula(sampled, x, model,
                                  static_cast<std::size_t>(cfg.cap));
      out.values["eta_copula"] =
          correct_known_eta(ols, eta, "eta_copula").estimate;
    });
  }
  return out;
}

inline RepOutput run_rep_sar(const ExperimentConfig& cfg, double sweep_v,
                             std::size_t cell, std::size_t rep) {
  std::mt19937_64 rng_net = make_rng(cfg.seed, cell, rep, Stream::network);
  std::mt19937_64 rng_x = make_rng(cfg.seed, cell, rep, Stream::treatment);
  std::mt19937_64 rng_eps = make_rng(cfg.seed, cell, rep, Stream::noise);
  std::mt19937_64 rng_samp = make_rng(cfg.seed, cell, rep, Stream::sampling);

  DegreeLaw law = DegreeLaw::uniform(0, 10);
  Network truth = gen_network(cfg.n, law, LinkWeight::unit, rng_net, nullptr,
                              cfg.link_weight);
  SamplingRule rule =
      cfg.design == DesignKind::sar_case1
          ? SamplingRule(FixedChoice{static_cast<std::size_t>(sweep_v),
                                     FixedChoice::Order::uniform_random})
          : SamplingRule(PadToDegree{static_cast<std::size_t>(sweep_v),
                                     cfg.link_weight});
  std::vector<double> x = gen_treatment_bernoulli(cfg.n, cfg.treatment_p, rng_x);
  std::vector<double> y =
      simulate_sar(truth, x, cfg.lambda, cfg.beta, cfg.noise_sd, rng_eps);
  Network sampled = apply_sampling(rule, truth, rng_samp);
  Decomposition dec = decompose(truth, sampled);
  DegreeStats stats = degree_stats(sampled, dec);

  // Researcher-side per-row expected missing mass, from the aggregates alone.
  std::vector<double> d_b(cfg.n, 0.0);
  double total_missing =
      static_cast<double>(stats.n_bad) * stats.d_b_bar;
  if (cfg.design == DesignKind::sar_case1) {
    std::vector<std::size_t> counts = sampled.link_counts();
    std::vector<std::size_t> capped;
    for (std::size_t i = 0; i < cfg.n; ++i)
      if (counts[i] == static_cast<std::size_t>(sweep_v)) capped.push_back(i);
    if (!capped.empty())
      for (std::size_t i : capped)
        d_b[i] = total_missing / static_cast<double>(capped.size());
  } else {
    for (std::size_t i = 0; i < cfg.n; ++i)
      d_b[i] = total_missing / static_cast<double>(cfg.n);
  }

  RepOutput out;
  if (wants(cfg, "naive")) {
    run_estimator(out, "naive", [&] {
      SarEstimate est = sar_naive(sampled, x, y, cfg.instrument_k);
      out.values["naive_lambda"] = est.lambda;
      out.values["naive_beta"] = est.beta;
    });
  }
  if (wants(cfg, "feasible")) {
    run_estimator(out, "feasible", [&] {
      SarCorrectionInputs in;
      in.d_b = d_b;
      in.k = cfg.instrument_k;
      SarEstimate est = sar_corrected(sampled, x, y, in);
      out.values["feasible_lambda"] = est.lambda;
      out.values["feasible_beta"] = est.beta;
    });
  }
  if (wants(cfg, "oracle")) {
    run_estimator(out, "oracle", [&] {
      SarCorrectionInputs in;
      in.d_b = d_b;
      in.true_missing = &dec.missing;
      in.k = cfg.instrument_k;
      SarEstimate est = sar_corrected(sampled, x, y, in);
      out.values["oracle_lambda"] = est.lambda;
      out.values["oracle_beta"] = est.beta;
    });
  }
  return out;
}

inline RepOutput run_rep(const ExperimentConfig& cfg, double sweep_v,
                         std::size_t cell, std::size_t rep,
                         const GroupLayout* layout) {
  switch (cfg.design) {
    case DesignKind::sar_case1:
    case DesignKind::sar_case2:
      return run_rep_sar(cfg, sweep_v, cell, rep);
    default:
      return run_rep_linear(cfg, sweep_v, cell, rep, layout);
  }
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       unsigned threads = 1) {
  if (threads == 0) threads = 1;
  ExperimentResult result;
  result.config_echo = cfg.to_json();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(
                    detail::fnv1a(result.config_echo.dump())));
  result.content_hash = hex;

  std::optional<detail::GroupLayout> layout;
  if (cfg.design == DesignKind::case2 || cfg.design == DesignKind::case5)
    layout = detail::make_group_layout(cfg.n);

  for (std::size_t cell = 0; cell < cfg.sweep.size(); ++cell) {
    double sweep_v = cfg.sweep[cell];
    std::vector<detail::RepOutput> slots(static_cast<std::size_t>(cfg.reps));
    std::exception_ptr first_error = nullptr;
    std::mutex err_mu;
    auto worker = [&](unsigned tid) {
      try {
        for (std::size_t rep = tid; rep < slots.size();
             rep += threads)
          slots[rep] = detail::run_rep(cfg, sweep_v, cell, rep,
                                       layout ? &*layout : nullptr);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
      for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    CellResult cr;
    cr.sweep = sweep_v;
    for (const auto& slot : slots) {
      for (const auto& [name, value] : slot.values)
        cr.estimates[name].push_back(value);
      for (const auto& [name, count] : slot.failures)
        cr.failures[name] += count;
    }
    result.cells.push_back(std::move(cr));
  }
  return result;
}

// ---------------------------------------------------------------------------
// File outputs: per-design sweep table (means), spread table (SDs), histogram
// of the representative cell, and a metadata echo with a content hash.

inline void emit_tables(const ExperimentResult& result,
                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  ExperimentConfig cfg =
      ExperimentConfig::from_json(result.config_echo);
  std::string tag = design_name(cfg.design);

  // Column order: configured estimator names expanded to the actual series.
  std::vector<std::string> series;
  for (const auto& cell : result.cells)
    for (const auto& [name, v] : cell.estimates)
      if (std::find(series.begin(), series.end(), name) == series.end())
        series.push_back(name);
  std::sort(series.begin(), series.end());

  auto write_summary = [&](const std::string& path, bool sds) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out.precision(10);
    out << "sweep";
    for (const auto& s : series) out << ',' << s;
    out << '\n';
    for (const auto& cell : result.cells) {
      out << cell.sweep;
      for (const auto& s : series) {
        auto it = cell.estimates.find(s);
        if (it == cell.estimates.end() || it->second.empty()) {
          out << ',';
          continue;
        }
        auto [m, sd] = mean_sd(it->second);
        out << ',' << (sds ? sd : m);
      }
      out << '\n';
    }
  };
  write_summary(out_dir + "/" + tag + "_table.csv", false);
  write_summary(out_dir + "/" + tag + "_sd.csv", true);

  // Histogram of the representative cell: 40 equal bins over the pooled range
  // of all series in that cell.
  const CellResult* rep_cell = nullptr;
  for (const auto& cell : result.cells)
    if (cfg.representative_sweep &&
        std::abs(cell.sweep - *cfg.representative_sweep) < 1e-12)
      rep_cell = &cell;
  if (rep_cell == nullptr && !result.cells.empty())
    rep_cell = &result.cells.front();
  if (rep_cell != nullptr) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& [name, v] : rep_cell->estimates)
      for (double a : v) {
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
    std::ofstream out(out_dir + "/" + tag + "_hist.csv");
    if (!out) throw InputError("cannot write histogram");
    out.precision(10);
    out << "estimator,bin_lo,bin_hi,count\n";
    if (std::isfinite(lo) && hi > lo) {
      const int bins = 40;
      double w = (hi - lo) / bins;
      for (const auto& [name, v] : rep_cell->estimates) {
        std::vector<std::size_t> counts(bins, 0);
        for (double a : v) {
          int b = std::min(bins - 1,
                           static_cast<int>(std::floor((a - lo) / w)));
          counts[static_cast<std::size_t>(std::max(0, b))] += 1;
        }
        for (int b = 0; b < bins; ++b)
          out << name << ',' << lo + b * w << ',' << lo + (b + 1) * w << ','
              << counts[static_cast<std::size_t>(b)] << '\n';
      }
    }
  }

  nlohmann::json meta;
  meta["config"] = result.config_echo;
  meta["content_hash"] = result.content_hash;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    nlohmann::json jc;
    jc["sweep"] = cell.sweep;
    for (const auto& [name, v] : cell.estimates) {
      auto [m, sd] = mean_sd(v);
      jc["mean"][name] = m;
      jc["sd"][name] = sd;
      jc["count"][name] = v.size();
    }
    for (const auto& [name, c] : cell.failures) jc["failures"][name] = c;
    cells.push_back(jc);
  }
  meta["cells"] = cells;
  std::ofstream out(out_dir + "/" + tag + "_meta.json");
  if (!out) throw InputError("cannot write metadata");
  out << meta.dump(2) << '\n';
}

}  // namespace netspill
