#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netspill/copula.hpp"
#include "netspill/error.hpp"
#include "netspill/linear.hpp"
#include "netspill/network.hpp"
#include "netspill/sar.hpp"

namespace netspill {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  while (p < e && (*p == ' ' || *p == '\t')) ++p;
  return ec == std::errc() && p == e;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Edge-list CSV: src,dst,weight with 0-based ids; weight defaults to 1.0; a
// header line is skipped if present. `n` overrides the inferred node count
// (1 + max id).

inline Network read_edge_csv(const std::string& path,
                             std::optional<std::size_t> n = std::nullopt) {
  std::ifstream in = detail::open_input(path);
  std::string line;
  struct Edge {
    std::size_t src, dst;
    double w;
  };
  std::vector<Edge> edges;
  std::size_t max_id = 0;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    double a = 0.0;
    if (first && !detail::parse_double(fields[0], a)) {
      first = false;  // header
      continue;
    }
    first = false;
    if (fields.size() < 2)
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": expected src,dst[,weight]");
    double src_d = 0.0, dst_d = 0.0, w = 1.0;
    if (!detail::parse_double(fields[0], src_d) ||
        !detail::parse_double(fields[1], dst_d) ||
        (fields.size() > 2 && !fields[2].empty() &&
         !detail::parse_double(fields[2], w)))
      throw InputError(path + ":" + std::to_string(line_no) + ": bad number");
    if (src_d < 0 || dst_d < 0 || src_d != std::floor(src_d) ||
        dst_d != std::floor(dst_d))
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": ids must be nonnegative integers");
    Edge e{static_cast<std::size_t>(src_d), static_cast<std::size_t>(dst_d), w};
    max_id = std::max({max_id, e.src, e.dst});
    edges.push_back(e);
  }
  std::size_t size = n.value_or(edges.empty() ? 0 : max_id + 1);
  Network net(size);
  for (const Edge& e : edges) net.add_link(e.dst, e.src, e.w);
  return net;
}

inline void write_edge_csv(const std::string& path, const Network& net) {
  std::ofstream out = detail::open_output(path);
  out << "src,dst,weight\n";
  for (std::size_t i = 0; i < net.size(); ++i)
    for (const Link& l : net.row(i))
      out << l.src << ',' << i << ',' << l.weight << '\n';
}

// ---------------------------------------------------------------------------
// Node data CSV: node,x,y[,w1,w2,...]; every node id in [0,n) must appear
// exactly once.

struct DataTable {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::vector<double>> covariates;  // column major
};

inline DataTable read_data_csv(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  std::string line;
  std::vector<std::vector<double>> rows;  // node, x, y, w...
  std::size_t width = 0, line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    double probe = 0.0;
    if (first && !detail::parse_double(fields[0], probe)) {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() < 3)
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": expected node,x,y[,covariates]");
    std::vector<double> row(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
      if (!detail::parse_double(fields[k], row[k]))
        throw InputError(path + ":" + std::to_string(line_no) + ": bad number");
    if (width == 0)
      width = row.size();
    else if (row.size() != width)
      throw InputError(path + ":" + std::to_string(line_no) +
                       ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path + ": no data rows");
  DataTable t;
  std::size_t n = rows.size();
  t.x.assign(n, 0.0);
  t.y.assign(n, 0.0);
  t.covariates.assign(width - 3, std::vector<double>(n, 0.0));
  std::vector<bool> seen(n, false);
  for (const auto& row : rows) {
    double id_d = row[0];
    if (id_d < 0 || id_d != std::floor(id_d) ||
        static_cast<std::size_t>(id_d) >= n)
      throw InputError(path + ": node ids must cover 0.." +
                       std::to_string(n - 1) + " exactly once");
    std::size_t id = static_cast<std::size_t>(id_d);
    if (seen[id]) throw InputError(path + ": duplicate node " + std::to_string(id));
    seen[id] = true;
    t.x[id] = row[1];
    t.y[id] = row[2];
    for (std::size_t k = 3; k < width; ++k) t.covariates[k - 3][id] = row[k];
  }
  return t;
}

// ---------------------------------------------------------------------------
// Degree-stats JSON.

inline nlohmann::json stats_to_json(const DegreeStats& st) {
  nlohmann::json j;
  j["n"] = st.n;
  j["n_bad"] = st.n_bad;
  j["d_H_bar"] = st.d_h_bar;
  j["d_B_bar"] = st.d_b_bar;
  if (st.conditional) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ConditionalCell& c : *st.conditional)
      arr.push_back({{"d_h", c.d_h}, {"d_b_bar", c.d_b_bar}, {"count", c.count}});
    j["conditional"] = arr;
  }
  if (st.treated_split) {
    j["treated_split"] = {{"d_B_pos", st.treated_split->pos_mean},
                          {"d_B_zero", st.treated_split->zero_mean},
                          {"pos_count", st.treated_split->pos_count},
                          {"zero_count", st.treated_split->zero_count}};
  }
  return j;
}

inline DegreeStats stats_from_json(const nlohmann::json& j) {
  DegreeStats st;
  try {
    st.n = j.at("n").get<std::size_t>();
    st.n_bad = j.at("n_bad").get<std::size_t>();
    st.d_h_bar = j.value("d_H_bar", 0.0);
    st.d_b_bar = j.value("d_B_bar", 0.0);
    if (j.contains("conditional")) {
      st.conditional.emplace();
      for (const auto& e : j.at("conditional")) {
        ConditionalCell c;
        c.d_h = e.at("d_h").get<double>();
        c.d_b_bar = e.at("d_b_bar").get<double>();
        c.count = e.value("count", std::size_t{0});
        st.conditional->push_back(c);
      }
    }
    if (j.contains("treated_split")) {
      const auto& s = j.at("treated_split");
      TreatedSplit split;
      split.pos_mean = s.at("d_B_pos").get<double>();
      split.zero_mean = s.at("d_B_zero").get<double>();
      split.pos_count = s.value("pos_count", std::size_t{0});
      split.zero_count = s.value("zero_count", std::size_t{0});
      st.treated_split = split;
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("stats json: ") + e.what());
  }
  if (st.n_bad > st.n) throw InputError("stats json: n_bad exceeds n");
  return st;
}

inline DegreeStats read_stats_json(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return stats_from_json(j);
}

inline void write_stats_json(const std::string& path, const DegreeStats& st) {
  std::ofstream out = detail::open_output(path);
  out << stats_to_json(st).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Copula model JSON.

inline nlohmann::json marginal_to_json(const Marginal& m) {
  nlohmann::json j;
  switch (m.kind()) {
    case Marginal::Kind::normal:
      j["kind"] = "normal";
      j["mean"] = m.normal_mean();
      j["sd"] = m.normal_sd();
      break;
    case Marginal::Kind::discrete_uniform:
      j["kind"] = "discrete_uniform";
      j["lo"] = m.du_lo();
      j["hi"] = m.du_hi();
      break;
    case Marginal::Kind::empirical:
      j["kind"] = "empirical";
      j["sample"] = m.sample();
      break;
  }
  return j;
}

inline Marginal marginal_from_json(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "normal")
    return Marginal::normal(j.at("mean").get<double>(), j.at("sd").get<double>());
  if (kind == "discrete_uniform")
    return Marginal::discrete_uniform(j.at("lo").get<long>(),
                                      j.at("hi").get<long>());
  if (kind == "empirical")
    return Marginal::empirical(j.at("sample").get<std::vector<double>>());
  throw InputError("marginal json: unknown kind " + kind);
}

inline nlohmann::json copula_to_json(const CopulaModel& m) {
  return {{"family", "gumbel"},
          {"theta", m.theta},
          {"x_marginal", marginal_to_json(m.x_marginal)},
          {"d_marginal", marginal_to_json(m.d_marginal)}};
}

inline CopulaModel copula_from_json(const nlohmann::json& j) {
  try {
    if (j.value("family", "gumbel") != std::string("gumbel"))
      throw InputError("copula json: unsupported family");
    CopulaModel m;
    m.theta = j.at("theta").get<double>();
    check_theta(m.theta);
    m.x_marginal = marginal_from_json(j.at("x_marginal"));
    m.d_marginal = marginal_from_json(j.at("d_marginal"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("copula json: ") + e.what());
  }
}

inline CopulaModel read_copula_json(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return copula_from_json(j);
}

// ---------------------------------------------------------------------------
// Result JSON.

inline nlohmann::json estimate_to_json(const EstimateResult& r) {
  nlohmann::json j;
  j["estimate"] = r.estimate;
  j["method"] = r.method;
  if (r.eta) j["eta"] = *r.eta;
  if (r.se) j["se"] = *r.se;
  if (!r.diagnostics.empty()) j["diagnostics"] = r.diagnostics;
  return j;
}

inline nlohmann::json sar_to_json(const SarEstimate& r) {
  nlohmann::json j;
  j["lambda"] = r.lambda;
  j["beta"] = r.beta;
  j["method"] = r.method;
  if (r.eta)
    j["eta"] = {{(*r.eta)[0][0], (*r.eta)[0][1]},
                {(*r.eta)[1][0], (*r.eta)[1][1]}};
  if (r.se_lambda) j["se_lambda"] = *r.se_lambda;
  if (r.se_beta) j["se_beta"] = *r.se_beta;
  if (!r.diagnostics.empty()) j["diagnostics"] = r.diagnostics;
  return j;
}

}  // namespace netspill
