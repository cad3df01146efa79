#pragma once

#include <cstdint>
#include <random>

namespace netspill {

// All randomness flows through mt19937_64 engines seeded by an explicit
// splitmix64 chain, so any (seed, cell, rep, stream) tuple maps to the same
// draws on every platform and at every thread count.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stream tags keep the per-replication generators for independent pipeline
// stages decoupled: changing how many draws one stage consumes must not
// perturb another stage.
enum class Stream : std::uint64_t {
  network = 1,
  treatment = 2,
  noise = 3,
  sampling = 4,
  estimator = 5,
  bootstrap = 6,
};

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t cell,
                                 std::uint64_t rep) {
  std::uint64_t s = splitmix64(root);
  s = splitmix64(s ^ (cell + 0x51ED2701u));
  s = splitmix64(s ^ (rep + 0x9E3779B9u));
  return s;
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::uint64_t cell,
                                std::uint64_t rep, Stream stream) {
  std::uint64_t s = derive_seed(root, cell, rep);
  s = splitmix64(s ^ static_cast<std::uint64_t>(stream) * 0xA24BAED4963EE407ull);
  return std::mt19937_64(s);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

}  // namespace netspill
