#include "tailcut/kmeans.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>

#include "tailcut/errors.hpp"
#include "tailcut/random.hpp"
#include "tailcut/regression.hpp"

namespace tailcut {

Matrix init_centers(const Dataset& dataset, const KMeansConfig& config) {
  if (config.k == 0) throw ArgumentError("k must be positive");
  if (config.k > dataset.size()) {
    throw ArgumentError("k (" + std::to_string(config.k) + ") exceeds dataset size (" +
                        std::to_string(dataset.size()) + ")");
  }
  Rng rng(config.seed);
  const auto picks = rng.sample_without_replacement(dataset.size(), config.k);
  Matrix centers(config.k, dataset.dim());
  for (std::size_t c = 0; c < picks.size(); ++c) {
    std::ranges::copy(dataset.point(picks[c]), centers.row(c).begin());
  }
  return centers;
}

Labels assign(const Dataset& dataset, const Matrix& centers) {
  if (centers.empty()) throw ArgumentError("assign: no centers");
  if (centers.cols() != dataset.dim()) {
    throw ArgumentError("assign: centers have dimension " + std::to_string(centers.cols()) +
                        ", dataset has " + std::to_string(dataset.dim()));
  }
  Labels labels(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto x = dataset.point(i);
    Label best = 0;
    double best_d = squared_distance(x, centers.row(0));
    for (std::size_t c = 1; c < centers.rows(); ++c) {
      const double d = squared_distance(x, centers.row(c));
      if (d < best_d) {
        best_d = d;
        best = static_cast<Label>(c);
      }
    }
    labels[i] = best;
  }
  return labels;
}

CenterUpdate recompute_centers(const Dataset& dataset, const Labels& labels, std::size_t k) {
  if (labels.size() != dataset.size()) throw ArgumentError("recompute_centers: label count mismatch");
  const std::size_t d = dataset.dim();
  Matrix sums(k, d);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Label c = labels[i];
    if (c >= k) throw ArgumentError("recompute_centers: label out of range");
    ++counts[c];
    auto s = sums.row(c);
    const auto x = dataset.point(i);
    for (std::size_t j = 0; j < d; ++j) s[j] += x[j];
  }
  CenterUpdate out{std::move(sums), {}};
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      out.repaired.push_back(c);
      continue;
    }
    const double inv = static_cast<double>(counts[c]);
    for (double& v : out.centers.row(c)) v /= inv;
  }
  if (out.repaired.empty()) return out;

  // Farthest points from their own centers, descending; index breaks ties.
  std::vector<double> dist(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    dist[i] = squared_distance(dataset.point(i), out.centers.row(labels[i]));
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  for (std::size_t r = 0; r < out.repaired.size(); ++r) {
    // More empty clusters than points cannot happen while k <= n.
    const std::size_t donor = order[std::min(r, order.size() - 1)];
    std::ranges::copy(dataset.point(donor), out.centers.row(out.repaired[r]).begin());
  }
  return out;
}

double kmeans_objective(const Dataset& dataset, const Matrix& centers, const Labels& labels) {
  double j = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    j += squared_distance(dataset.point(i), centers.row(labels[i]));
  }
  return j;
}

KMeansResult run_kmeans(const Dataset& dataset, const KMeansConfig& config,
                        const IterationObserver& observer) {
  if (config.max_iterations == 0) throw ArgumentError("max_iterations must be positive");
  const auto start = std::chrono::steady_clock::now();
  KMeansResult result;
  result.trace.algorithm = Algorithm::KMeans;
  auto& state = result.state;
  state.centers = init_centers(dataset, config);

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    Labels labels = assign(dataset, state.centers);
    const bool converged = it > 1 && labels == state.labels;
    auto update = recompute_centers(dataset, labels, config.k);
    for (std::size_t c : update.repaired) {
      result.trace.events.push_back(
          {it, "empty_cluster_repair", "cluster " + std::to_string(c) + " reseeded at farthest point"});
    }
    state.centers = std::move(update.centers);
    state.labels = std::move(labels);
    state.iteration = it;
    const double previous = state.objective;
    state.objective = kmeans_objective(dataset, state.centers, state.labels);

    IterationRecord rec;
    rec.iteration = it;
    rec.objective = state.objective;
    if (it > 1 && previous != 0.0) rec.change_rate = change_rate(previous, state.objective);
    rec.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.converged = converged;
    rec.labels = state.labels;
    result.trace.records.push_back(std::move(rec));

    const auto control =
        observer ? observer(result.trace.records.back()) : IterationControl::Continue;
    if (converged) {
      result.trace.termination = Termination::Converged;
      return result;
    }
    if (control == IterationControl::Stop) {
      result.trace.termination = Termination::StoppedByObserver;
      return result;
    }
  }
  result.trace.termination = Termination::MaxIterations;
  return result;
}

}  // namespace tailcut
