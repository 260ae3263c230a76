#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tailcut/trace.hpp"

namespace tailcut {

/// |j_curr - j_prev| / |j_prev|. Throws SingularObjectiveError when j_prev is 0.
double change_rate(double j_prev, double j_curr);

struct AccuracyRatePair {
  double accuracy = 0.0;     // r_i
  double change_rate = 0.0;  // h_i
};

struct PairSource {
  std::size_t group = 0;
  std::size_t iteration = 0;
};

struct TrainingPairs {
  std::vector<AccuracyRatePair> pairs;
  std::vector<PairSource> provenance;  // parallel to pairs

  std::size_t size() const noexcept { return pairs.size(); }
  void append(const TrainingPairs& other);
};

/// (Rand(P_i, reference), h_i) for every iteration i >= 2 of a converged
/// trace. Iterations whose change rate is undefined (J_{i-1} = 0) are
/// skipped.
TrainingPairs collect_pairs(const IterationTrace& trace, const Labels& reference,
                            std::size_t group = 0);

struct FitDiagnostics {
  double sse = 0.0;
  double r_squared = 0.0;
  double adjusted_r_squared = 0.0;
  double rmse = 0.0;
  std::size_t n_points = 0;
};

/// Least-squares polynomial h ~ sum_j coefficients[j] * r^j.
struct PolynomialFit {
  std::vector<double> coefficients;  // ascending powers
  FitDiagnostics diagnostics;

  std::size_t degree() const noexcept { return coefficients.size() - 1; }
  double evaluate(double r) const noexcept;
};

/// Normal equations solved by Gaussian elimination with partial pivoting.
/// Throws RankDeficiencyError with fewer than degree+1 distinct r values or
/// a numerically singular normal matrix.
PolynomialFit fit_polynomial(const TrainingPairs& pairs, std::size_t degree);

struct QuadraticModel {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  FitDiagnostics diagnostics;

  /// beta0 + beta1*r + beta2*r^2 in Horner form.
  double evaluate(double r) const noexcept { return beta0 + r * (beta1 + r * beta2); }
};

QuadraticModel fit_quadratic(const TrainingPairs& pairs);

/// Stop threshold h_j = max(0, model(target)). 0 means "run to convergence".
double threshold_for_accuracy(const QuadraticModel& model, double target_accuracy);

struct ModelComparison {
  std::size_t degree = 0;
  PolynomialFit fit;
};

struct ComparisonResult {
  std::vector<ModelComparison> ranked;  // best first
  std::vector<std::string> notes;       // degrees omitted and why
};

/// Fits degrees 1, 2 and 3 and ranks them by adjusted R^2, descending.
/// Scores within 1e-12 of each other count as tied; the lower degree wins.
ComparisonResult compare_models(const TrainingPairs& pairs);

}  // namespace tailcut
