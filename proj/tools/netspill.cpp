// Command-line front end: Monte Carlo sweeps, one-shot estimation on files,
// robustness bounds, bootstrap standard errors, and dependence-model fitting.
// Exit codes: 0 success, 1 usage or input problem, 2 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "netspill/copula.hpp"
#include "netspill/dgp.hpp"
#include "netspill/error.hpp"
#include "netspill/experiment.hpp"
#include "netspill/inference.hpp"
#include "netspill/io.hpp"
#include "netspill/linear.hpp"
#include "netspill/network.hpp"
#include "netspill/sampling.hpp"
#include "netspill/sar.hpp"

namespace {

using namespace netspill;

struct CommonArgs {
  std::string edges;
  std::string data;
  std::string stats;
  std::optional<std::size_t> n;
};

Network load_network(const CommonArgs& a) { return read_edge_csv(a.edges, a.n); }

void emit_json(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write " + out_path);
    out << j.dump(2) << '\n';
  }
}

int run_mc(const std::string& config_path, std::string out_dir,
           std::optional<std::uint64_t> seed, std::optional<int> reps,
           unsigned threads) {
  std::ifstream in(config_path);
  if (!in) throw InputError("cannot open " + config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(config_path + ": " + e.what());
  }
  if (seed) j["seed"] = *seed;
  if (reps) j["reps"] = *reps;
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  ExperimentResult result = run_experiment(cfg, threads);
  if (out_dir.empty()) out_dir = "out";
  emit_tables(result, out_dir);
  std::cerr << "wrote " << design_name(cfg.design) << " tables to " << out_dir
            << " (hash " << result.content_hash << ")\n";
  for (const auto& cell : result.cells) {
    std::cerr << "  sweep " << cell.sweep << ':';
    for (const auto& [name, v] : cell.estimates) {
      auto [m, sd] = mean_sd(v);
      std::cerr << ' ' << name << '=' << m;
    }
    std::cerr << '\n';
  }
  return 0;
}

int run_estimate(const CommonArgs& a, const std::string& method,
                 std::optional<double> eta_known, const std::string& true_edges,
                 const std::string& copula_path, long cap, int instrument_k,
                 const std::string& db_mode, std::optional<double> p_pos_true,
                 const std::string& se_mode, const std::string& out_path) {
  Network sampled = load_network(a);
  DataTable data = read_data_csv(a.data);
  if (data.x.size() != sampled.size())
    throw InputError("data rows (" + std::to_string(data.x.size()) +
                     ") do not match network size (" +
                     std::to_string(sampled.size()) + "); pass --n");
  std::optional<DegreeStats> stats;
  if (!a.stats.empty()) stats = read_stats_json(a.stats);

  auto need_stats = [&]() -> const DegreeStats& {
    if (!stats) throw InputError("method '" + method + "' needs --stats");
    return *stats;
  };

  nlohmann::json out;
  if (method.rfind("sar", 0) == 0) {
    SarEstimate est;
    if (method == "sar_naive") {
      est = sar_naive(sampled, data.x, data.y, instrument_k);
    } else {
      SarCorrectionInputs in;
      in.k = instrument_k;
      std::vector<double> d_b(sampled.size(), 0.0);
      Network truth;
      if (method == "sar_oracle") {
        if (true_edges.empty())
          throw InputError("sar_oracle needs --true-edges");
        truth = read_edge_csv(true_edges, sampled.size());
      }
      const DegreeStats& st = need_stats();
      double total = static_cast<double>(st.n_bad) * st.d_b_bar;
      if (db_mode == "capped") {
        std::vector<std::size_t> counts = sampled.link_counts();
        std::vector<std::size_t> capped;
        for (std::size_t i = 0; i < counts.size(); ++i)
          if (counts[i] == static_cast<std::size_t>(cap)) capped.push_back(i);
        if (capped.empty())
          throw NumericalError("no row sits at the cap; nothing to correct");
        for (std::size_t i : capped)
          d_b[i] = total / static_cast<double>(capped.size());
      } else {
        for (double& v : d_b) v = total / static_cast<double>(d_b.size());
      }
      in.d_b = d_b;
      Decomposition dec;
      if (method == "sar_oracle") {
        dec = decompose(truth, sampled);
        in.true_missing = &dec.missing;
        est = sar_corrected(sampled, data.x, data.y, in);
      } else if (method == "sar_feasible") {
        est = sar_corrected(sampled, data.x, data.y, in);
      } else {
        throw InputError("unknown method '" + method + "'");
      }
    }
    out = sar_to_json(est);
    emit_json(out, out_path);
    std::cerr << est.method << ": lambda=" << est.lambda
              << " beta=" << est.beta << '\n';
    return 0;
  }

  EstimateResult result;
  if (method == "dummy") {
    DummyOptions opt;
    opt.p_pos_true = p_pos_true;
    result = estimate_dummy(sampled, data.x, data.y, need_stats(), opt);
  } else {
    EstimateResult ols = ols_spillover(sampled, data.x, data.y, data.covariates);
    double eta = 0.0;
    if (method == "ols") {
      result = ols;
    } else if (method == "eta_known") {
      if (!eta_known) throw InputError("eta_known needs --eta");
      result = correct_known_eta(ols, *eta_known, "eta_known");
      eta = *eta_known;
    } else if (method == "eta_indep") {
      eta = eta_hat_independent(sampled, data.x, need_stats());
      result = correct_known_eta(ols, eta, "eta_indep");
    } else if (method == "eta_cond") {
      eta = eta_hat_conditional(sampled, data.x, need_stats());
      result = correct_known_eta(ols, eta, "eta_cond");
    } else if (method == "eta_copula") {
      if (copula_path.empty()) throw InputError("eta_copula needs --copula");
      CopulaModel model = read_copula_json(copula_path);
      eta = eta_hat_copula(sampled, data.x, model,
                           static_cast<std::size_t>(cap));
      result = correct_known_eta(ols, eta, "eta_copula");
    } else if (method == "eta_oracle") {
      if (true_edges.empty()) throw InputError("eta_oracle needs --true-edges");
      Network truth = read_edge_csv(true_edges, sampled.size());
      Decomposition dec = decompose(truth, sampled);
      std::vector<double> sh = spillovers(sampled, data.x);
      std::vector<double> sb = spillovers(dec.missing, data.x);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < sh.size(); ++i) {
        num += sh[i] * sb[i];
        den += sh[i] * sh[i];
      }
      if (!(den > 0.0)) throw NumericalError("degenerate exposure");
      eta = num / den;
      result = correct_known_eta(ols, eta, "eta_oracle");
    } else {
      throw InputError("unknown method '" + method + "'");
    }
    if (se_mode == "sandwich") {
      OlsFit fit = ols_fit(sampled, data.x, data.y, data.covariates);
      result.se = sandwich_known_eta(fit, method == "ols" ? 0.0 : eta).se;
    } else if (se_mode == "two-step") {
      result.se =
          sandwich_two_step(sampled, data.x, data.y, need_stats(),
                            method == "eta_cond" ? EtaEstimator::conditional
                                                 : EtaEstimator::independent)
              .se;
    }
  }
  out = estimate_to_json(result);
  emit_json(out, out_path);
  std::cerr << result.method << ": estimate=" << result.estimate;
  if (result.eta) std::cerr << " eta=" << *result.eta;
  if (result.se) std::cerr << " se=" << *result.se;
  std::cerr << '\n';
  return 0;
}

int run_robustness(const CommonArgs& a, std::optional<double> tau,
                   std::optional<double> eta_min, std::optional<double> eta_max,
                   const std::string& out_path) {
  Network sampled = load_network(a);
  DataTable data = read_data_csv(a.data);
  DegreeStats stats;
  if (!a.stats.empty()) {
    stats = read_stats_json(a.stats);
  } else {
    stats.n = sampled.size();
    stats.n_bad = 0;
  }
  RobustnessOptions opt;
  opt.tau = tau;
  if (eta_min || eta_max) {
    if (!(eta_min && eta_max))
      throw InputError("give both --eta-min and --eta-max");
    opt.eta_range = {{*eta_min, *eta_max}};
  }
  if (!opt.tau && !opt.eta_range)
    throw InputError("give --tau and/or an eta interval");
  RobustnessReport rep = robustness(sampled, data.x, data.y, stats, opt);
  nlohmann::json j;
  j["beta_ols"] = rep.beta_ols;
  if (rep.eta_star) j["eta_star"] = *rep.eta_star;
  if (rep.d_b_star) j["d_B_star"] = *rep.d_b_star;
  if (rep.beta_range)
    j["beta_range"] = {rep.beta_range->first, rep.beta_range->second};
  emit_json(j, out_path);
  return 0;
}

int run_bootstrap(const CommonArgs& a, double d_bar_b, int outer, int inner,
                  std::uint64_t seed, const std::string& rows_path,
                  const std::string& out_path) {
  Network sampled = load_network(a);
  DataTable data = read_data_csv(a.data);
  BootstrapConfig cfg;
  cfg.outer = outer;
  cfg.inner = inner;
  cfg.seed = seed;
  if (!rows_path.empty()) {
    std::ifstream in(rows_path);
    if (!in) throw InputError("cannot open " + rows_path);
    std::size_t r;
    while (in >> r) cfg.rows.push_back(r);
  }
  VarianceReport rep = bootstrap_se(sampled, data.x, data.y, d_bar_b, cfg);
  nlohmann::json j;
  j["se"] = rep.se;
  j["method"] = rep.method;
  j["seed"] = rep.seed;
  j["components"] = rep.components;
  emit_json(j, out_path);
  return 0;
}

int run_fit_copula(const std::string& pairs_path, const CommonArgs& a,
                   const std::string& out_path) {
  std::vector<double> xs, ds;
  if (!pairs_path.empty()) {
    std::ifstream in(pairs_path);
    if (!in) throw InputError("cannot open " + pairs_path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = netspill::detail::split_csv_line(line);
      double u, v;
      if (f.size() < 2) throw InputError(pairs_path + ": expected two columns");
      if (!netspill::detail::parse_double(f[0], u)) {
        if (first) {
          first = false;
          continue;
        }
        throw InputError(pairs_path + ": bad number");
      }
      if (!netspill::detail::parse_double(f[1], v))
        throw InputError(pairs_path + ": bad number");
      first = false;
      xs.push_back(u);
      ds.push_back(v);
    }
  } else {
    if (a.edges.empty() || a.data.empty())
      throw InputError("fit-copula needs --pairs, or --edges with --data");
    Network net = load_network(a);
    DataTable data = read_data_csv(a.data);
    if (data.x.size() != net.size())
      throw InputError("data rows do not match network size");
    std::vector<std::size_t> counts = net.link_counts();
    for (std::size_t i = 0; i < net.size(); ++i) {
      xs.push_back(data.x[i]);
      ds.push_back(static_cast<double>(counts[i]));
    }
  }
  CopulaModel model = fit_gumbel(xs, ds);
  emit_json(copula_to_json(model), out_path);
  std::cerr << "theta=" << model.theta << " (n=" << xs.size() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spillover estimation on partially observed networks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::string out_path;
  app.add_option("--seed", seed, "root seed for randomized commands");
  app.add_option("--threads", threads, "worker threads for sweeps");
  app.add_option("--out", out_path, "output file or directory");

  auto* mc = app.add_subcommand("mc", "run a simulation sweep from a config");
  std::string config_path;
  std::optional<int> reps_override;
  std::optional<std::uint64_t> seed_override;
  mc->add_option("--config", config_path, "experiment config JSON")->required();
  mc->add_option("--reps", reps_override, "override replication count");
  mc->callback([&] {
    if (app.count("--seed") > 0) seed_override = seed;
  });

  CommonArgs common;
  auto add_common = [&](CLI::App* cmd, bool need_edges, bool need_data) {
    auto* e = cmd->add_option("--edges", common.edges, "observed edge CSV");
    auto* d = cmd->add_option("--data", common.data, "node data CSV");
    if (need_edges) e->required();
    if (need_data) d->required();
    cmd->add_option("--stats", common.stats, "degree stats JSON");
    cmd->add_option("--n", common.n, "node count override");
  };

  auto* est = app.add_subcommand("estimate", "estimate on observed files");
  add_common(est, true, true);
  std::string method = "ols";
  std::optional<double> eta_known;
  std::string true_edges, copula_path, db_mode = "uniform", se_mode = "none";
  long cap = 5;
  int instrument_k = 2;
  std::optional<double> p_pos_true;
  est->add_option("--method", method,
                  "ols|eta_known|eta_indep|eta_cond|eta_copula|eta_oracle|"
                  "dummy|sar_naive|sar_feasible|sar_oracle");
  est->add_option("--eta", eta_known, "bias ratio for eta_known");
  est->add_option("--true-edges", true_edges, "true edge CSV (oracle methods)");
  est->add_option("--copula", copula_path, "fitted dependence model JSON");
  est->add_option("--cap", cap, "survey cap for eta_copula / capped db-mode");
  est->add_option("--instrument-k", instrument_k, "instrument power depth");
  est->add_option("--db-mode", db_mode,
                  "missing-mass layout for sar corrections: uniform|capped");
  est->add_option("--p-pos-true", p_pos_true,
                  "probability of >=1 treated true contact (dummy method)");
  est->add_option("--se", se_mode, "standard error: none|sandwich|two-step");

  auto* rob = app.add_subcommand("robustness", "bias needed to move a result");
  add_common(rob, true, true);
  std::optional<double> tau, eta_min, eta_max;
  rob->add_option("--tau", tau, "target slope");
  rob->add_option("--eta-min", eta_min, "lower bias-ratio bound");
  rob->add_option("--eta-max", eta_max, "upper bias-ratio bound");

  auto* boot = app.add_subcommand("bootstrap", "bootstrap se via planted links");
  add_common(boot, true, true);
  double d_bar_b = 0.0;
  int outer = 40, inner = 25;
  std::string rows_path;
  boot->add_option("--d-bar-b", d_bar_b, "mean missing in-degree per node")
      ->required();
  boot->add_option("--outer", outer, "planted-network draws");
  boot->add_option("--inner", inner, "observation resamples per draw");
  boot->add_option("--rows", rows_path, "file of row indices open to planting");

  auto* fitc = app.add_subcommand("fit-copula", "fit the dependence model");
  add_common(fitc, false, false);
  std::string pairs_path;
  fitc->add_option("--pairs", pairs_path, "CSV of x,d pairs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (mc->parsed())
      return run_mc(config_path, out_path, seed_override, reps_override,
                    threads);
    if (est->parsed())
      return run_estimate(common, method, eta_known, true_edges, copula_path,
                          cap, instrument_k, db_mode, p_pos_true, se_mode,
                          out_path);
    if (rob->parsed()) return run_robustness(common, tau, eta_min, eta_max,
                                             out_path);
    if (boot->parsed())
      return run_bootstrap(common, d_bar_b, outer, inner, seed, rows_path,
                           out_path);
    if (fitc->parsed()) return run_fit_copula(pairs_path, common, out_path);
  } catch (const netspill::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const netspill::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
