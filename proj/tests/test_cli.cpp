#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "netspill/copula.hpp"
#include "netspill/io.hpp"
#include "netspill/linear.hpp"
#include "netspill/network.hpp"
#include "netspill/rng.hpp"

using namespace netspill;
namespace fs = std::filesystem;

namespace {

const char* kCli = NETSPILL_CLI_PATH;

struct Run {
  int code = -1;
  std::string out;
};

// Runs the binary with stdout captured and stderr discarded.
Run run_cli(const std::string& args) {
  static int counter = 0;
  fs::path cap = fs::temp_directory_path() /
                 ("netspill_cli_out_" + std::to_string(counter++) + ".txt");
  std::string cmd = std::string(kCli) + " " + args + " > " + cap.string() +
                    " 2> /dev/null";
  int raw = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(cap);
  std::string line;
  while (std::getline(in, line)) r.out += line + "\n";
  fs::remove(cap);
  return r;
}

// A fixed observed network with node data, written once per process.
struct CliFiles {
  fs::path dir;
  fs::path edges, data, truth;
  Network sampled{6};
  std::vector<double> x{1.0, 1.0, 0.0, 1.0, 0.0, 0.0};
  std::vector<double> y;

  CliFiles() {
    dir = fs::temp_directory_path() / "netspill_cli_fixture";
    fs::create_directories(dir);

    Network truth_net(6);
    for (std::size_t i = 0; i < 6; ++i) {
      truth_net.add_link(i, (i + 1) % 6);
      truth_net.add_link(i, (i + 2) % 6);
    }
    for (std::size_t i = 0; i < 6; ++i) sampled.add_link(i, (i + 1) % 6);

    // Binary-exact values survive the CSV round trip bit for bit.
    y.resize(6);
    std::vector<double> s_true = spillovers(truth_net, x);
    for (std::size_t i = 0; i < 6; ++i)
      y[i] = 0.5 * s_true[i] + 0.25 * static_cast<double>(i);

    edges = dir / "edges.csv";
    truth = dir / "truth.csv";
    data = dir / "data.csv";
    write_edge_csv(edges.string(), sampled);
    write_edge_csv(truth.string(), truth_net);
    std::ofstream d(data);
    d << "node,x,y\n";
    for (std::size_t i = 0; i < 6; ++i)
      d << i << ',' << x[i] << ',' << y[i] << '\n';
  }
};

const CliFiles& files() {
  static CliFiles f;
  return f;
}

}  // namespace

TEST_CASE("help exits cleanly, usage errors do not") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("estimate --help").code == 0);
  CHECK(run_cli("").code == 1);            // a subcommand is required
  CHECK(run_cli("estimate").code == 1);    // --edges/--data are required
  CHECK(run_cli("frobnicate").code == 1);  // unknown subcommand
}

TEST_CASE("edge files round trip through the readers") {
  const CliFiles& f = files();
  Network back = read_edge_csv(f.edges.string());
  REQUIRE(back.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(back.row(i) == f.sampled.row(i));

  DataTable t = read_data_csv(f.data.string());
  CHECK(t.x == f.x);
  CHECK(t.y == f.y);
}

TEST_CASE("plain estimation matches the library") {
  const CliFiles& f = files();
  Run r = run_cli("estimate --edges " + f.edges.string() + " --data " +
                  f.data.string() + " --method ols");
  REQUIRE(r.code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  double expect = ols_spillover(f.sampled, f.x, f.y).estimate;
  CHECK(j.at("estimate").get<double>() == Catch::Approx(expect));
  CHECK(j.at("method").get<std::string>() == "ols");
}

TEST_CASE("known-ratio correction divides the naive slope") {
  const CliFiles& f = files();
  Run naive = run_cli("estimate --edges " + f.edges.string() + " --data " +
                      f.data.string() + " --method ols");
  Run fixed = run_cli("estimate --edges " + f.edges.string() + " --data " +
                      f.data.string() + " --method eta_known --eta 0.5");
  REQUIRE(naive.code == 0);
  REQUIRE(fixed.code == 0);
  double b0 = nlohmann::json::parse(naive.out).at("estimate").get<double>();
  nlohmann::json j = nlohmann::json::parse(fixed.out);
  CHECK(j.at("estimate").get<double>() == Catch::Approx(b0 / 1.5));
  CHECK(j.at("eta").get<double>() == 0.5);

  // eta_known without --eta is a usage problem.
  Run missing = run_cli("estimate --edges " + f.edges.string() + " --data " +
                        f.data.string() + " --method eta_known");
  CHECK(missing.code == 1);
}

TEST_CASE("oracle correction reads the true network") {
  const CliFiles& f = files();
  Run r = run_cli("estimate --edges " + f.edges.string() + " --data " +
                  f.data.string() + " --method eta_oracle --true-edges " +
                  f.truth.string());
  REQUIRE(r.code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("method").get<std::string>() == "eta_oracle");
  // The missing half of each row biases the naive slope upward.
  CHECK(j.at("eta").get<double>() > 0.0);
  double b0 = ols_spillover(f.sampled, f.x, f.y).estimate;
  CHECK(j.at("estimate").get<double>() < b0);
}

TEST_CASE("sandwich standard errors ride along") {
  const CliFiles& f = files();
  Run r = run_cli("estimate --edges " + f.edges.string() + " --data " +
                  f.data.string() + " --method ols --se sandwich");
  REQUIRE(r.code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("se").get<double>() >= 0.0);
}

TEST_CASE("missing input files fail with a usage code") {
  const CliFiles& f = files();
  Run r = run_cli("estimate --edges /nonexistent/e.csv --data " +
                  f.data.string());
  CHECK(r.code == 1);
  Run bad = run_cli("estimate --edges " + f.edges.string() + " --data " +
                    f.data.string() + " --method nope");
  CHECK(bad.code == 1);
}

TEST_CASE("robustness subcommand reports the target ratio") {
  const CliFiles& f = files();
  Run r = run_cli("robustness --edges " + f.edges.string() + " --data " +
                  f.data.string() + " --tau 0.5 --eta-min 0.1 --eta-max 0.3");
  REQUIRE(r.code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  double b0 = ols_spillover(f.sampled, f.x, f.y).estimate;
  CHECK(j.at("beta_ols").get<double>() == Catch::Approx(b0));
  CHECK(j.at("eta_star").get<double>() == Catch::Approx(b0 / 0.5 - 1.0));
  REQUIRE(j.at("beta_range").size() == 2);
  CHECK(j["beta_range"][0].get<double>() == Catch::Approx(b0 / 1.3));
  CHECK(j["beta_range"][1].get<double>() == Catch::Approx(b0 / 1.1));

  // No target and no interval: nothing to answer.
  Run none = run_cli("robustness --edges " + f.edges.string() + " --data " +
                     f.data.string());
  CHECK(none.code == 1);
}

TEST_CASE("bootstrap subcommand reports a positive spread") {
  const CliFiles& f = files();
  Run r = run_cli("bootstrap --edges " + f.edges.string() + " --data " +
                  f.data.string() +
                  " --d-bar-b 0 --outer 4 --inner 10 --seed 3");
  REQUIRE(r.code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("se").get<double>() > 0.0);
  CHECK(j.at("method").get<std::string>() == "bootstrap");
  CHECK(j.at("components").at("replicates").get<double>() == 40.0);

  Run missing = run_cli("bootstrap --edges " + f.edges.string() + " --data " +
                        f.data.string());
  CHECK(missing.code == 1);  // --d-bar-b is required
}

TEST_CASE("dependence model fits from a pairs file") {
  const CliFiles& f = files();
  fs::path pairs = f.dir / "pairs.csv";
  {
    auto rng = make_rng(27);
    std::ofstream out(pairs);
    out.precision(12);
    out << "x,d\n";
    for (int i = 0; i < 300; ++i) {
      auto [u, v] = gumbel_sample(4.0, rng);
      out << u << ',' << v << "\n";
    }
  }
  fs::path model = f.dir / "model.json";
  Run r = run_cli("fit-copula --pairs " + pairs.string() + " --out " +
                  model.string());
  REQUIRE(r.code == 0);
  CopulaModel m = read_copula_json(model.string());
  CHECK(m.theta > 2.5);
  CHECK(m.theta < 6.5);

  Run none = run_cli("fit-copula");
  CHECK(none.code == 1);
}

TEST_CASE("simulation sweeps write their tables") {
  const CliFiles& f = files();
  fs::path cfg_path = f.dir / "mc.json";
  {
    nlohmann::json cfg;
    cfg["design"] = "case1";
    cfg["n"] = 150;
    cfg["reps"] = 2;
    cfg["sweep"] = {4.0};
    std::ofstream out(cfg_path);
    out << cfg.dump();
  }
  fs::path out_dir = f.dir / "mc_out";
  Run r = run_cli("mc --config " + cfg_path.string() + " --seed 9 --out " +
                  out_dir.string());
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out_dir / "case1_table.csv"));
  CHECK(fs::exists(out_dir / "case1_sd.csv"));
  CHECK(fs::exists(out_dir / "case1_hist.csv"));
  CHECK(fs::exists(out_dir / "case1_meta.json"));

  Run bad = run_cli("mc --config /nonexistent/cfg.json");
  CHECK(bad.code == 1);
}
