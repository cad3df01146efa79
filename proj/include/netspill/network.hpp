#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netspill/error.hpp"

namespace netspill {

// Directed weighted network in row form: row i stores the in-links of node i,
// so entry (i, j) is the link from j into i and row sums are in-degrees.
// Rows are kept sorted by source id; duplicate (i, j) pairs are rejected.

struct Link {
  std::size_t src = 0;
  double weight = 1.0;

  friend bool operator==(const Link&, const Link&) = default;
};

class Network {
 public:
  Network() = default;
  explicit Network(std::size_t n) : rows_(n) {}

  std::size_t size() const { return rows_.size(); }

  void add_link(std::size_t dst, std::size_t src, double weight = 1.0) {
    if (dst >= rows_.size() || src >= rows_.size())
      throw InputError("link (" + std::to_string(src) + " -> " +
                       std::to_string(dst) + ") out of range for n=" +
                       std::to_string(rows_.size()));
    if (dst == src)
      throw InputError("self link at node " + std::to_string(dst));
    if (!std::isfinite(weight) || weight == 0.0)
      throw InputError("link weight must be finite and nonzero");
    rows_[dst].push_back({src, weight});
    sorted_ = false;
  }

  const std::vector<Link>& row(std::size_t i) const {
    ensure_sorted();
    return rows_[i];
  }

  // Weighted in-degree of every node.
  std::vector<double> in_degrees() const {
    std::vector<double> d(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i)
      for (const Link& l : rows_[i]) d[i] += l.weight;
    return d;
  }

  // Number of in-links of every node, ignoring weights.
  std::vector<std::size_t> link_counts() const {
    std::vector<std::size_t> c(size());
    for (std::size_t i = 0; i < size(); ++i) c[i] = rows_[i].size();
    return c;
  }

  std::size_t total_links() const {
    std::size_t t = 0;
    for (const auto& r : rows_) t += r.size();
    return t;
  }

  double max_abs_row_sum() const {
    double m = 0.0;
    for (const auto& r : rows_) {
      double s = 0.0;
      for (const Link& l : r) s += std::abs(l.weight);
      m = std::max(m, s);
    }
    return m;
  }

  bool has_link(std::size_t dst, std::size_t src) const {
    ensure_sorted();
    const auto& r = rows_[dst];
    auto it = std::lower_bound(r.begin(), r.end(), src,
                               [](const Link& l, std::size_t s) { return l.src < s; });
    return it != r.end() && it->src == src;
  }

 private:
  void ensure_sorted() const {
    if (sorted_) return;
    for (auto& r : rows_) {
      if (!std::is_sorted(r.begin(), r.end(),
                          [](const Link& a, const Link& b) { return a.src < b.src; }))
        std::sort(r.begin(), r.end(),
                  [](const Link& a, const Link& b) { return a.src < b.src; });
      for (std::size_t k = 1; k < r.size(); ++k)
        if (r[k].src == r[k - 1].src)
          throw InputError("duplicate link into node from source " +
                           std::to_string(r[k].src));
    }
    sorted_ = true;
  }

  mutable std::vector<std::vector<Link>> rows_;
  mutable bool sorted_ = true;
};

// (net x)_i = sum_j w_ij x_j: each node's exposure to x through its in-links.
inline std::vector<double> spillovers(const Network& net,
                                      const std::vector<double>& x) {
  if (x.size() != net.size())
    throw InputError("spillovers: vector length " + std::to_string(x.size()) +
                     " != network size " + std::to_string(net.size()));
  std::vector<double> s(net.size(), 0.0);
  for (std::size_t i = 0; i < net.size(); ++i) {
    double acc = 0.0;
    for (const Link& l : net.row(i)) acc += l.weight * x[l.src];
    s[i] = acc;
  }
  return s;
}

// Entrywise difference between the true network and a sampled view of it.
// `missing` holds true − sampled; a spurious sampled link therefore shows up
// with negative weight. `bad_rows` lists the nodes whose sampled in-links are
// wrong in any way, in increasing order.
struct Decomposition {
  Network missing;
  std::vector<std::size_t> bad_rows;
};

inline Decomposition decompose(const Network& truth, const Network& sampled) {
  if (truth.size() != sampled.size())
    throw InputError("decompose: size mismatch " + std::to_string(truth.size()) +
                     " vs " + std::to_string(sampled.size()));
  Decomposition dec;
  dec.missing = Network(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& tr = truth.row(i);
    const auto& sr = sampled.row(i);
    std::size_t a = 0, b = 0;
    bool bad = false;
    auto emit = [&](std::size_t src, double w) {
      if (w != 0.0) {
        dec.missing.add_link(i, src, w);
        bad = true;
      }
    };
    while (a < tr.size() || b < sr.size()) {
      if (b == sr.size() || (a < tr.size() && tr[a].src < sr[b].src)) {
        emit(tr[a].src, tr[a].weight);
        ++a;
      } else if (a == tr.size() || sr[b].src < tr[a].src) {
        emit(sr[b].src, -sr[b].weight);
        ++b;
      } else {
        emit(tr[a].src, tr[a].weight - sr[b].weight);
        ++a;
        ++b;
      }
    }
    if (bad) dec.bad_rows.push_back(i);
  }
  return dec;
}

// Aggregate degree summaries a field team could publish without releasing the
// link-level data. All means over the affected rows; `conditional` buckets the
// missing in-degree by the observed one.
struct ConditionalCell {
  double d_h = 0.0;      // observed in-degree bucket
  double d_b_bar = 0.0;  // mean missing in-degree within the bucket
  std::size_t count = 0;
};

struct TreatedSplit {
  double pos_mean = 0.0;   // mean missing in-degree where observed exposure > 0
  double zero_mean = 0.0;  // mean missing in-degree where observed exposure == 0
  std::size_t pos_count = 0;
  std::size_t zero_count = 0;
};

struct DegreeStats {
  std::size_t n = 0;
  std::size_t n_bad = 0;
  double d_h_bar = 0.0;  // mean observed in-degree over affected rows
  double d_b_bar = 0.0;  // mean missing in-degree over affected rows
  std::optional<std::vector<ConditionalCell>> conditional;
  std::optional<TreatedSplit> treated_split;
};

struct DegreeStatsOptions {
  bool conditional = false;
  // Bucket width for the conditional table; 0 groups by exact value.
  double bin_width = 0.0;
  // When set, adds the split of mean missing degree by whether the observed
  // exposure to this vector is positive. Split taken over all nodes, with
  // missing degree 0 outside the affected rows.
  const std::vector<double>* split_by_exposure_to = nullptr;
};

inline DegreeStats degree_stats(const Network& sampled, const Decomposition& dec,
                                const DegreeStatsOptions& opt = {}) {
  if (sampled.size() != dec.missing.size())
    throw InputError("degree_stats: sampled/missing size mismatch");
  DegreeStats st;
  st.n = sampled.size();
  st.n_bad = dec.bad_rows.size();
  std::vector<double> dh = sampled.in_degrees();
  std::vector<double> db = dec.missing.in_degrees();
  std::map<double, std::pair<double, std::size_t>> cond;
  for (std::size_t i : dec.bad_rows) {
    st.d_h_bar += dh[i];
    st.d_b_bar += db[i];
    if (opt.conditional) {
      double key = dh[i];
      if (opt.bin_width > 0.0)
        key = opt.bin_width * std::floor(dh[i] / opt.bin_width);
      auto& cell = cond[key];
      cell.first += db[i];
      cell.second += 1;
    }
  }
  if (st.n_bad > 0) {
    st.d_h_bar /= static_cast<double>(st.n_bad);
    st.d_b_bar /= static_cast<double>(st.n_bad);
  }
  if (opt.conditional) {
    st.conditional.emplace();
    for (const auto& [key, cell] : cond)
      st.conditional->push_back(
          {key, cell.first / static_cast<double>(cell.second), cell.second});
  }
  if (opt.split_by_exposure_to != nullptr) {
    const std::vector<double>& x = *opt.split_by_exposure_to;
    if (x.size() != sampled.size())
      throw InputError("degree_stats: exposure vector length mismatch");
    std::vector<double> sh = spillovers(sampled, x);
    TreatedSplit split;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      if (sh[i] > 0.0) {
        split.pos_mean += db[i];
        ++split.pos_count;
      } else {
        split.zero_mean += db[i];
        ++split.zero_count;
      }
    }
    if (split.pos_count > 0) split.pos_mean /= static_cast<double>(split.pos_count);
    if (split.zero_count > 0) split.zero_mean /= static_cast<double>(split.zero_count);
    st.treated_split = split;
  }
  return st;
}

// Solves (I - lambda net) w = v by the geometric series
// w = v + lambda net v + (lambda net)^2 v + ..., which converges whenever
// |lambda| times the spectral radius of the network is below 1. The final
// residual is checked explicitly; failure to meet `tol` raises.
inline std::vector<double> neumann_solve(const Network& net, double lambda,
                                         const std::vector<double>& v,
                                         double tol = 1e-10,
                                         std::size_t max_terms = 10000) {
  if (v.size() != net.size()) throw InputError("neumann_solve: length mismatch");
  if (!std::isfinite(lambda)) throw InputError("neumann_solve: bad lambda");
  std::vector<double> w = v;
  std::vector<double> t = v;
  std::vector<double> tn(net.size());
  double vnorm = 0.0;
  for (double a : v) vnorm = std::max(vnorm, std::abs(a));
  const double blowup = 1e6 * std::max(vnorm, 1.0);
  for (std::size_t k = 0; k < max_terms; ++k) {
    double tnorm = 0.0;
    for (std::size_t i = 0; i < net.size(); ++i) {
      double acc = 0.0;
      for (const Link& l : net.row(i)) acc += l.weight * t[l.src];
      tn[i] = lambda * acc;
      tnorm = std::max(tnorm, std::abs(tn[i]));
    }
    for (std::size_t i = 0; i < net.size(); ++i) w[i] += tn[i];
    if (tnorm < tol) {
      // Residual of (I - lambda net) w = v, checked against the same tol.
      double res = 0.0;
      for (std::size_t i = 0; i < net.size(); ++i) {
        double acc = 0.0;
        for (const Link& l : net.row(i)) acc += l.weight * w[l.src];
        res = std::max(res, std::abs(v[i] + lambda * acc - w[i]));
      }
      if (res >= tol)
        throw NumericalError("neumann_solve: residual " + std::to_string(res) +
                             " above tolerance");
      return w;
    }
    if (tnorm > blowup)
      throw NumericalError(
          "neumann_solve: series diverging (|lambda| * max row sum = " +
          std::to_string(std::abs(lambda) * net.max_abs_row_sum()) + ")");
    t.swap(tn);
  }
  throw NumericalError(
      "neumann_solve: no convergence after " + std::to_string(max_terms) +
      " terms (|lambda| * max row sum = " +
      std::to_string(std::abs(lambda) * net.max_abs_row_sum()) + ")");
}

}  // namespace netspill
