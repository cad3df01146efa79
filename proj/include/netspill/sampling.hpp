#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <variant>
#include <vector>

#include "netspill/error.hpp"
#include "netspill/network.hpp"

namespace netspill {

// Observation rules that turn a true network into the network a survey would
// record. Each rule acts row by row on the in-links.

// Respondents name at most `cap` contacts. Surplus links are dropped either
// uniformly at random or keeping the largest weights (ties broken by lower
// source id).
struct FixedChoice {
  std::size_t cap = 0;
  enum class Order { uniform_random, strongest_first };
  Order order = Order::uniform_random;
};

// The survey only records shared membership: the reported network is the
// binary complete graph within each group, whatever the true links were.
struct GroupMembership {
  std::vector<int> groups;  // node -> group id
};

// Links at or below the threshold are too weak to be noticed; only weights
// strictly above `tau` survive.
struct WeightThreshold {
  double tau = 0.0;
};

// Respondents must name exactly `target` contacts, inventing uniformly random
// extra ones when they have fewer. Invented links get `pad_weight`.
struct PadToDegree {
  std::size_t target = 0;
  double pad_weight = 1.0;
};

using SamplingRule =
    std::variant<FixedChoice, GroupMembership, WeightThreshold, PadToDegree>;

inline Network apply_sampling(const FixedChoice& rule, const Network& truth,
                              std::mt19937_64& rng) {
  Network out(truth.size());
  std::vector<Link> keep;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& r = truth.row(i);
    if (r.size() <= rule.cap) {
      for (const Link& l : r) out.add_link(i, l.src, l.weight);
      continue;
    }
    keep.clear();
    if (rule.order == FixedChoice::Order::uniform_random) {
      std::sample(r.begin(), r.end(), std::back_inserter(keep), rule.cap, rng);
    } else {
      keep.assign(r.begin(), r.end());
      std::stable_sort(keep.begin(), keep.end(), [](const Link& a, const Link& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.src < b.src;
      });
      keep.resize(rule.cap);
    }
    for (const Link& l : keep) out.add_link(i, l.src, l.weight);
  }
  return out;
}

inline Network apply_sampling(const GroupMembership& rule, const Network& truth,
                              std::mt19937_64&) {
  if (rule.groups.size() != truth.size())
    throw InputError("group membership: partition length != network size");
  int gmax = -1;
  for (int g : rule.groups) {
    if (g < 0) throw InputError("group membership: negative group id");
    gmax = std::max(gmax, g);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(gmax) + 1);
  for (std::size_t i = 0; i < rule.groups.size(); ++i)
    members[static_cast<std::size_t>(rule.groups[i])].push_back(i);
  Network out(truth.size());
  for (const auto& m : members)
    for (std::size_t i : m)
      for (std::size_t j : m)
        if (i != j) out.add_link(i, j, 1.0);
  return out;
}

inline Network apply_sampling(const WeightThreshold& rule, const Network& truth,
                              std::mt19937_64&) {
  Network out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (const Link& l : truth.row(i))
      if (l.weight > rule.tau) out.add_link(i, l.src, l.weight);
  return out;
}

inline Network apply_sampling(const PadToDegree& rule, const Network& truth,
                              std::mt19937_64& rng) {
  if (rule.target >= truth.size())
    throw InputError("pad to degree: target exceeds n - 1");
  Network out(truth.size());
  std::uniform_int_distribution<std::size_t> pick(0, truth.size() - 1);
  std::vector<std::size_t> added;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& r = truth.row(i);
    for (const Link& l : r) out.add_link(i, l.src, l.weight);
    added.clear();
    while (r.size() + added.size() < rule.target) {
      std::size_t j = pick(rng);
      if (j == i || truth.has_link(i, j)) continue;
      if (std::find(added.begin(), added.end(), j) != added.end()) continue;
      added.push_back(j);
      out.add_link(i, j, rule.pad_weight);
    }
  }
  return out;
}

inline Network apply_sampling(const SamplingRule& rule, const Network& truth,
                              std::mt19937_64& rng) {
  return std::visit(
      [&](const auto& r) { return apply_sampling(r, truth, rng); }, rule);
}

// Share of true links that appear in the sampled network (by cell, ignoring
// weights). An empty true network counts as fully recovered.
inline double fraction_correct(const Network& truth, const Network& sampled) {
  if (truth.size() != sampled.size())
    throw InputError("fraction_correct: size mismatch");
  std::size_t total = 0, hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (const Link& l : truth.row(i)) {
      ++total;
      if (sampled.has_link(i, l.src)) ++hit;
    }
  if (total == 0) return 1.0;
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace netspill
