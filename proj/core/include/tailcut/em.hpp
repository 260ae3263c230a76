#pragma once

#include <cstdint>
#include <vector>

#include "tailcut/dataset.hpp"
#include "tailcut/matrix.hpp"
#include "tailcut/trace.hpp"

namespace tailcut {

/// Axis-aligned Gaussian mixture.
struct GaussianMixture {
  std::vector<double> weights;  // k, sums to 1
  Matrix means;                 // k x d
  Matrix variances;             // k x d, per-axis

  std::size_t components() const noexcept { return weights.size(); }
};

struct Responsibilities {
  Matrix posterior;  // n x k, rows sum to 1
  double log_likelihood = 0.0;
};

struct EMConfig {
  std::size_t k = 2;
  std::size_t max_iterations = 500;
  std::uint64_t seed = 0;
  /// Relative log-likelihood change below which the run counts as converged.
  double full_convergence_epsilon = 1e-8;
  /// Per-axis variance floor as a fraction of the dataset's global variance
  /// on that axis.
  double variance_floor = 1e-6;
};

/// Per-axis variance of the whole dataset (population normalization).
std::vector<double> global_variance(const Dataset& dataset);

/// Absolute per-axis floors: config.variance_floor * global variance, with
/// the floor ratio itself standing in on zero-variance axes.
std::vector<double> variance_floors(const Dataset& dataset, const EMConfig& config);

/// log of the diagonal Gaussian density at x.
double log_gaussian_density(std::span<const double> x, std::span<const double> mean,
                            std::span<const double> variance);

/// Posterior memberships by log-sum-exp. Throws NumericError naming the
/// first point whose mixture log-density is not finite.
Responsibilities e_step(const Dataset& dataset, const GaussianMixture& model);

/// Maximizes the expected complete-data log-likelihood given `resp`.
/// Throws DegenerateComponentError for a component with zero total mass.
GaussianMixture m_step(const Dataset& dataset, const Responsibilities& resp, const EMConfig& config);

/// Argmax responsibility per point; lowest component on ties.
Labels hard_labels(const Responsibilities& resp);

/// Expected complete-data log-likelihood Q(model | resp).
double expected_complete_log_likelihood(const Dataset& dataset, const Responsibilities& resp,
                                        const GaussianMixture& model);

/// Means at k distinct seeded sample points, uniform weights, variances at
/// the global per-axis variance.
GaussianMixture initial_mixture(const Dataset& dataset, const EMConfig& config);

struct EMResult {
  IterationTrace trace;
  GaussianMixture model;
  Responsibilities responsibilities;
};

/// Iteration i runs an M step on the previous responsibilities followed by
/// an E step, so J_i is the log-likelihood of the i-th parameter estimate
/// and P_i its hard partition. A zero-mass component is reinitialized at the
/// point of lowest mixture density and the event is recorded.
EMResult run_em(const Dataset& dataset, const EMConfig& config,
                const IterationObserver& observer = {});

}  // namespace tailcut
