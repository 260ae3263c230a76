#pragma once

// Hand-rolled generators for property tests. Every generator is a pure
// function of its Rng, so a failing case is reproducible from the seed
// printed by the test.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tailcut/dataset.hpp"
#include "tailcut/random.hpp"
#include "tailcut/trace.hpp"

namespace tailcut::gen {

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform_index(hi - lo + 1));
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); }

inline Labels random_labels(Rng& rng, std::size_t n, std::size_t k) {
  Labels out(n);
  for (auto& l : out) l = static_cast<Label>(rng.uniform_index(k));
  return out;
}

inline Dataset random_dataset(Rng& rng, std::size_t n, std::size_t d, double scale = 10.0) {
  Dataset ds;
  ds.id = "random";
  ds.points = Matrix(n, d);
  for (auto& v : ds.points.values()) v = uniform(rng, -scale, scale);
  return ds;
}

/// Equal-weight axis-aligned mixture with unit variances and means spread
/// `separation` apart along a staircase of axes.
inline SynthSpec planted_spec(std::size_t n, std::size_t d, std::size_t k, double separation) {
  SynthSpec spec;
  spec.id = "planted";
  spec.n_points = n;
  spec.dim = d;
  for (std::size_t c = 0; c < k; ++c) {
    MixtureComponent m;
    for (std::size_t j = 0; j < d; ++j) {
      m.mean.push_back(((c + j) % k == 0 || c == j) ? separation * static_cast<double>(c) : 0.0);
      m.stddev.push_back(1.0);
    }
    m.weight = 1.0 / static_cast<double>(k);
    spec.components.push_back(m);
  }
  // Make the weights sum to exactly 1 in floating point.
  double rest = 1.0;
  for (std::size_t c = 0; c + 1 < k; ++c) rest -= spec.components[c].weight;
  spec.components.back().weight = rest;
  return spec;
}

/// Fraction of points on which `labels` agrees with `truth` under the best
/// one-to-one relabeling, found by brute force over permutations (k small).
inline double best_permutation_agreement(const Labels& labels, const Labels& truth, std::size_t k) {
  std::vector<Label> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = static_cast<Label>(i);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += perm[labels[i]] == truth[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

}  // namespace tailcut::gen
