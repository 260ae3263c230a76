#include "tailcut/em.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "tailcut/errors.hpp"
#include "tailcut/random.hpp"
#include "tailcut/regression.hpp"

namespace tailcut {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;  // log(2*pi)

void check_model(const Dataset& dataset, const GaussianMixture& model) {
  const std::size_t k = model.components();
  if (k == 0) throw ArgumentError("mixture has no components");
  if (model.means.rows() != k || model.variances.rows() != k) {
    throw ArgumentError("mixture parameter shapes disagree");
  }
  if (model.means.cols() != dataset.dim() || model.variances.cols() != dataset.dim()) {
    throw ArgumentError("mixture dimension does not match dataset");
  }
}

struct MStepOutcome {
  GaussianMixture model;
  std::vector<std::size_t> degenerate;
};

MStepOutcome m_step_impl(const Dataset& dataset, const Responsibilities& resp,
                         std::span<const double> floors) {
  const std::size_t n = dataset.size();
  const std::size_t d = dataset.dim();
  const std::size_t k = resp.posterior.cols();
  if (resp.posterior.rows() != n) throw ArgumentError("responsibility rows do not match dataset");

  std::vector<double> mass(k, 0.0);
  Matrix means(k, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = dataset.point(i);
    for (std::size_t c = 0; c < k; ++c) {
      const double r = resp.posterior(i, c);
      mass[c] += r;
      auto m = means.row(c);
      for (std::size_t j = 0; j < d; ++j) m[j] += r * x[j];
    }
  }
  MStepOutcome out;
  for (std::size_t c = 0; c < k; ++c) {
    if (mass[c] == 0.0) {
      out.degenerate.push_back(c);
      continue;
    }
    for (double& v : means.row(c)) v /= mass[c];
  }

  Matrix variances(k, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = dataset.point(i);
    for (std::size_t c = 0; c < k; ++c) {
      const double r = resp.posterior(i, c);
      if (r == 0.0) continue;
      auto v = variances.row(c);
      const auto m = means.row(c);
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = x[j] - m[j];
        v[j] += r * dev * dev;
      }
    }
  }
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  out.model.weights.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    out.model.weights[c] = mass[c] / total;
    if (mass[c] == 0.0) continue;
    auto v = variances.row(c);
    for (std::size_t j = 0; j < d; ++j) v[j] = std::max(v[j] / mass[c], floors[j]);
  }
  out.model.means = std::move(means);
  out.model.variances = std::move(variances);
  return out;
}

}  // namespace

std::vector<double> global_variance(const Dataset& dataset) {
  const std::size_t n = dataset.size();
  const std::size_t d = dataset.dim();
  std::vector<double> mean(d, 0.0);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = dataset.point(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = dataset.point(i);
    for (std::size_t j = 0; j < d; ++j) var[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
  }
  for (double& v : var) v /= static_cast<double>(n);
  return var;
}

std::vector<double> variance_floors(const Dataset& dataset, const EMConfig& config) {
  if (!(config.variance_floor > 0.0)) throw ArgumentError("variance_floor must be positive");
  auto floors = global_variance(dataset);
  for (double& f : floors) f = f > 0.0 ? config.variance_floor * f : config.variance_floor;
  return floors;
}

double log_gaussian_density(std::span<const double> x, std::span<const double> mean,
                            std::span<const double> variance) {
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double dev = x[j] - mean[j];
    acc += kLogTwoPi + std::log(variance[j]) + dev * dev / variance[j];
  }
  return -0.5 * acc;
}

Responsibilities e_step(const Dataset& dataset, const GaussianMixture& model) {
  check_model(dataset, model);
  const std::size_t n = dataset.size();
  const std::size_t k = model.components();
  std::vector<double> log_weights(k);
  for (std::size_t c = 0; c < k; ++c) log_weights[c] = std::log(model.weights[c]);

  Responsibilities out{Matrix(n, k), 0.0};
  std::vector<double> lp(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = dataset.point(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      lp[c] = log_weights[c] + log_gaussian_density(x, model.means.row(c), model.variances.row(c));
      best = std::max(best, lp[c]);
    }
    if (!std::isfinite(best)) {
      throw NumericError("e_step: mixture log-density is not finite at point " + std::to_string(i));
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(lp[c] - best);
    const double lse = best + std::log(sum);
    auto row = out.posterior.row(i);
    for (std::size_t c = 0; c < k; ++c) row[c] = std::exp(lp[c] - lse);
    out.log_likelihood += lse;
  }
  if (!std::isfinite(out.log_likelihood)) throw NumericError("e_step: log-likelihood overflow");
  return out;
}

GaussianMixture m_step(const Dataset& dataset, const Responsibilities& resp, const EMConfig& config) {
  const auto floors = variance_floors(dataset, config);
  auto outcome = m_step_impl(dataset, resp, floors);
  if (!outcome.degenerate.empty()) {
    const std::size_t c = outcome.degenerate.front();
    throw DegenerateComponentError("m_step: component " + std::to_string(c) +
                                       " has zero total responsibility",
                                   c);
  }
  return std::move(outcome.model);
}

Labels hard_labels(const Responsibilities& resp) {
  const std::size_t n = resp.posterior.rows();
  Labels labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = resp.posterior.row(i);
    labels[i] = static_cast<Label>(std::ranges::max_element(row) - row.begin());
  }
  return labels;
}

double expected_complete_log_likelihood(const Dataset& dataset, const Responsibilities& resp,
                                        const GaussianMixture& model) {
  check_model(dataset, model);
  double q = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto x = dataset.point(i);
    for (std::size_t c = 0; c < model.components(); ++c) {
      const double r = resp.posterior(i, c);
      if (r == 0.0) continue;
      q += r * (std::log(model.weights[c]) +
                log_gaussian_density(x, model.means.row(c), model.variances.row(c)));
    }
  }
  return q;
}

GaussianMixture initial_mixture(const Dataset& dataset, const EMConfig& config) {
  if (config.k == 0) throw ArgumentError("k must be positive");
  if (config.k > dataset.size()) {
    throw ArgumentError("k (" + std::to_string(config.k) + ") exceeds dataset size (" +
                        std::to_string(dataset.size()) + ")");
  }
  Rng rng(config.seed);
  const auto picks = rng.sample_without_replacement(dataset.size(), config.k);
  const auto floors = variance_floors(dataset, config);
  auto var = global_variance(dataset);
  for (std::size_t j = 0; j < var.size(); ++j) var[j] = std::max(var[j], floors[j]);

  GaussianMixture model;
  model.weights.assign(config.k, 1.0 / static_cast<double>(config.k));
  model.means = Matrix(config.k, dataset.dim());
  model.variances = Matrix(config.k, dataset.dim());
  for (std::size_t c = 0; c < config.k; ++c) {
    std::ranges::copy(dataset.point(picks[c]), model.means.row(c).begin());
    std::ranges::copy(var, model.variances.row(c).begin());
  }
  return model;
}

EMResult run_em(const Dataset& dataset, const EMConfig& config, const IterationObserver& observer) {
  if (config.max_iterations == 0) throw ArgumentError("max_iterations must be positive");
  if (!(config.full_convergence_epsilon > 0.0)) {
    throw ArgumentError("full_convergence_epsilon must be positive");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto floors = variance_floors(dataset, config);
  auto reset_variance = global_variance(dataset);
  for (std::size_t j = 0; j < reset_variance.size(); ++j) {
    reset_variance[j] = std::max(reset_variance[j], floors[j]);
  }

  EMResult result;
  result.trace.algorithm = Algorithm::EM;
  result.model = initial_mixture(dataset, config);
  result.responsibilities = e_step(dataset, result.model);

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    auto outcome = m_step_impl(dataset, result.responsibilities, floors);
    if (!outcome.degenerate.empty()) {
      // Lowest mixture density under the model that produced `resp`.
      std::vector<double> density(dataset.size());
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> lp(result.model.components());
        for (std::size_t c = 0; c < lp.size(); ++c) {
          lp[c] = std::log(result.model.weights[c]) +
                  log_gaussian_density(dataset.point(i), result.model.means.row(c),
                                       result.model.variances.row(c));
          best = std::max(best, lp[c]);
        }
        double sum = 0.0;
        for (double v : lp) sum += std::exp(v - best);
        density[i] = best + std::log(sum);
      }
      std::vector<std::size_t> order(dataset.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::ranges::stable_sort(order,
                               [&](std::size_t a, std::size_t b) { return density[a] < density[b]; });
      auto& model = outcome.model;
      for (std::size_t r = 0; r < outcome.degenerate.size(); ++r) {
        const std::size_t c = outcome.degenerate[r];
        const std::size_t donor = order[std::min(r, order.size() - 1)];
        std::ranges::copy(dataset.point(donor), model.means.row(c).begin());
        std::ranges::copy(reset_variance, model.variances.row(c).begin());
        model.weights[c] = 1.0 / static_cast<double>(dataset.size());
        result.trace.events.push_back({it, "degenerate_component_reinit",
                                       "component " + std::to_string(c) + " reset at point " +
                                           std::to_string(donor)});
      }
      const double total = std::accumulate(model.weights.begin(), model.weights.end(), 0.0);
      for (double& w : model.weights) w /= total;
    }
    result.model = std::move(outcome.model);
    result.responsibilities = e_step(dataset, result.model);

    const double current = result.responsibilities.log_likelihood;
    IterationRecord rec;
    rec.iteration = it;
    rec.objective = current;
    bool converged = false;
    if (it > 1) {
      const double previous = result.trace.records.back().objective;
      if (previous != 0.0) {
        rec.change_rate = change_rate(previous, current);
        converged = *rec.change_rate < config.full_convergence_epsilon;
      } else {
        converged = current == 0.0;
      }
    }
    rec.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.converged = converged;
    rec.labels = hard_labels(result.responsibilities);
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
