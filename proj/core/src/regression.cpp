#include "tailcut/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "tailcut/accuracy.hpp"
#include "tailcut/errors.hpp"

namespace tailcut {

double change_rate(double j_prev, double j_curr) {
  if (j_prev == 0.0) throw SingularObjectiveError("change rate undefined for a zero previous objective");
  return std::abs(j_curr - j_prev) / std::abs(j_prev);
}

void TrainingPairs::append(const TrainingPairs& other) {
  pairs.insert(pairs.end(), other.pairs.begin(), other.pairs.end());
  provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
}

TrainingPairs collect_pairs(const IterationTrace& trace, const Labels& reference, std::size_t group) {
  if (!trace.converged()) throw ArgumentError("collect_pairs needs a converged trace");
  if (trace.records.empty() || reference.size() != trace.final_record().labels.size()) {
    throw ArgumentError("reference partition does not match the trace");
  }
  TrainingPairs out;
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    const auto& rec = trace.records[i];
    if (!rec.change_rate) continue;
    out.pairs.push_back({rand_index(rec.labels, reference), *rec.change_rate});
    out.provenance.push_back({group, rec.iteration});
  }
  return out;
}

double PolynomialFit::evaluate(double r) const noexcept {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * r + *it;
  return acc;
}

namespace {

// Solves a (row-major, m x m) * x = b in place.
std::vector<double> solve_partial_pivot(std::vector<double> a, std::vector<double> b) {
  const std::size_t m = b.size();
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  const double tiny = scale * 1e-14;
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(a[r * m + col]) > std::abs(a[pivot * m + col])) pivot = r;
    }
    if (!(std::abs(a[pivot * m + col]) > tiny)) {
      throw RankDeficiencyError("normal matrix is singular");
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < m; ++c) std::swap(a[col * m + c], a[pivot * m + c]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const double f = a[r * m + col] / a[col * m + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < m; ++c) a[r * m + c] -= f * a[col * m + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(m);
  for (std::size_t r = m; r-- > 0;) {
    double acc = b[r];
    for (std::size_t c = r + 1; c < m; ++c) acc -= a[r * m + c] * x[c];
    x[r] = acc / a[r * m + r];
  }
  return x;
}

FitDiagnostics diagnose(const TrainingPairs& pairs, const PolynomialFit& fit) {
  const std::size_t n = pairs.size();
  double mean = 0.0;
  for (const auto& p : pairs.pairs) mean += p.change_rate;
  mean /= static_cast<double>(n);
  // The rounded mean of identical values can miss them by an ulp; keep
  // SST exactly 0 in that case.
  const bool constant = std::ranges::all_of(
      pairs.pairs, [&](const AccuracyRatePair& p) { return p.change_rate == pairs.pairs[0].change_rate; });
  if (constant) mean = pairs.pairs[0].change_rate;
  double sse = 0.0;
  double sst = 0.0;
  for (const auto& p : pairs.pairs) {
    const double e = p.change_rate - fit.evaluate(p.accuracy);
    sse += e * e;
    sst += (p.change_rate - mean) * (p.change_rate - mean);
  }
  FitDiagnostics d;
  d.n_points = n;
  d.sse = sse;
  d.rmse = std::sqrt(sse / static_cast<double>(n));
  // A constant response is explained exactly by the intercept.
  d.r_squared = sst > 0.0 ? 1.0 - sse / sst : 1.0;
  const double dof = static_cast<double>(n) - static_cast<double>(fit.degree()) - 1.0;
  d.adjusted_r_squared =
      dof > 0.0 ? 1.0 - (1.0 - d.r_squared) * (static_cast<double>(n) - 1.0) / dof : d.r_squared;
  return d;
}

}  // namespace

PolynomialFit fit_polynomial(const TrainingPairs& pairs, std::size_t degree) {
  const std::size_t m = degree + 1;
  std::set<double> distinct;
  for (const auto& p : pairs.pairs) distinct.insert(p.accuracy);
  if (distinct.size() < m) {
    throw RankDeficiencyError("degree-" + std::to_string(degree) + " fit needs " +
                              std::to_string(m) + " distinct accuracy values, have " +
                              std::to_string(distinct.size()));
  }
  // Work in t = (r - center) / spread so the normal matrix stays well
  // conditioned when accuracies bunch up near 1.
  double center = 0.0;
  for (const auto& p : pairs.pairs) center += p.accuracy;
  center /= static_cast<double>(pairs.size());
  double spread = 0.0;
  for (const auto& p : pairs.pairs) spread = std::max(spread, std::abs(p.accuracy - center));

  // Normal equations: (X^T X) a = X^T h with X_ij = t_i^j.
  std::vector<double> power_sums(2 * degree + 1, 0.0);
  std::vector<double> rhs(m, 0.0);
  for (const auto& p : pairs.pairs) {
    const double t = (p.accuracy - center) / spread;
    double pw = 1.0;
    for (std::size_t j = 0; j < power_sums.size(); ++j) {
      power_sums[j] += pw;
      if (j < m) rhs[j] += pw * p.change_rate;
      pw *= t;
    }
  }
  std::vector<double> normal(m * m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) normal[r * m + c] = power_sums[r + c];
  }
  const auto scaled = solve_partial_pivot(std::move(normal), std::move(rhs));

  // Expand sum_j a_j ((r - center)/spread)^j back into powers of r.
  PolynomialFit fit;
  fit.coefficients.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double aj = scaled[j] / std::pow(spread, static_cast<double>(j));
    double binom = 1.0;  // C(j, q)
    for (std::size_t q = 0; q <= j; ++q) {
      fit.coefficients[q] += aj * binom * std::pow(-center, static_cast<double>(j - q));
      binom = binom * static_cast<double>(j - q) / static_cast<double>(q + 1);
    }
  }
  for (double c : fit.coefficients) {
    if (!std::isfinite(c)) throw RankDeficiencyError("non-finite polynomial coefficient");
  }
  fit.diagnostics = diagnose(pairs, fit);
  return fit;
}

QuadraticModel fit_quadratic(const TrainingPairs& pairs) {
  const auto fit = fit_polynomial(pairs, 2);
  return QuadraticModel{fit.coefficients[0], fit.coefficients[1], fit.coefficients[2],
                        fit.diagnostics};
}

double threshold_for_accuracy(const QuadraticModel& model, double target_accuracy) {
  return std::max(0.0, model.evaluate(target_accuracy));
}

ComparisonResult compare_models(const TrainingPairs& pairs) {
  ComparisonResult out;
  for (std::size_t degree = 1; degree <= 3; ++degree) {
    try {
      out.ranked.push_back({degree, fit_polynomial(pairs, degree)});
    } catch (const RankDeficiencyError& e) {
      out.notes.push_back("degree " + std::to_string(degree) + " omitted: " + e.what());
    }
  }
  // Selection by repeated max: near-ties make the ordering non-transitive,
  // which a comparison sort cannot take.
  std::vector<ModelComparison> pending = std::move(out.ranked);
  out.ranked.clear();
  while (!pending.empty()) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& c : pending) top = std::max(top, c.fit.diagnostics.adjusted_r_squared);
    auto pick = pending.begin();
    while (!(top - pick->fit.diagnostics.adjusted_r_squared <= 1e-12)) ++pick;  // lowest degree
    out.ranked.push_back(std::move(*pick));
    pending.erase(pick);
  }
  return out;
}

}  // namespace tailcut
