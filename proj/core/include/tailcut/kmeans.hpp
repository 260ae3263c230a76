#pragma once

#include <cstdint>

#include "tailcut/dataset.hpp"
#include "tailcut/matrix.hpp"
#include "tailcut/trace.hpp"

namespace tailcut {

enum class KMeansInit { UniformSample };

struct KMeansConfig {
  std::size_t k = 2;
  std::size_t max_iterations = 500;
  std::uint64_t seed = 0;
  KMeansInit init = KMeansInit::UniformSample;
};

struct KMeansState {
  Matrix centers;  // k x d
  Labels labels;
  std::size_t iteration = 0;
  double objective = 0.0;
};

/// k distinct rows chosen uniformly without replacement by config.seed.
Matrix init_centers(const Dataset& dataset, const KMeansConfig& config);

/// Nearest center under squared Euclidean distance, lowest index on ties.
Labels assign(const Dataset& dataset, const Matrix& centers);

struct CenterUpdate {
  Matrix centers;
  std::vector<std::size_t> repaired;  // clusters that were empty and got reseeded
};

/// Cluster means. An empty cluster is reseeded at the point currently
/// farthest from its own assigned (freshly recomputed) center; several empty
/// clusters take successively farther-ranked distinct points.
CenterUpdate recompute_centers(const Dataset& dataset, const Labels& labels, std::size_t k);

/// Sum of squared distances from each point to its assigned center.
double kmeans_objective(const Dataset& dataset, const Matrix& centers, const Labels& labels);

struct KMeansResult {
  IterationTrace trace;
  KMeansState state;
};

/// Lloyd iterations. Iteration i assigns labels P_i from the previous
/// centers, recomputes the means and records J_i against them. The run is
/// converged at the first iteration whose labels equal the previous ones;
/// that confirming iteration is recorded (its change rate is 0).
KMeansResult run_kmeans(const Dataset& dataset, const KMeansConfig& config,
                        const IterationObserver& observer = {});

}  // namespace tailcut
