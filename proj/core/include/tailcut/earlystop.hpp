#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailcut/dataset.hpp"
#include "tailcut/errors.hpp"
#include "tailcut/regression.hpp"
#include "tailcut/trace.hpp"

namespace tailcut {

/// Algorithm choice plus the knobs that make a run reproducible.
struct ClusteringSettings {
  Algorithm algorithm = Algorithm::KMeans;
  std::size_t k = 2;
  std::size_t max_iterations = 500;
  double em_epsilon = 1e-8;
  double em_variance_floor = 1e-6;
};

IterationTrace run_clustering(const Dataset& dataset, const ClusteringSettings& settings,
                              std::uint64_t seed, const IterationObserver& observer = {});

/// Clustering seed for one group. Depends only on (seed, group id), so a
/// group runs identically whether it lands in training or validation.
std::uint64_t group_seed(std::uint64_t seed, std::size_t group);

// --- Predictor ------------------------------------------------------------

struct TrainedPredictor {
  QuadraticModel model;
  Algorithm algorithm = Algorithm::KMeans;
  std::size_t k = 0;
  std::string dataset_id;
  double training_time_seconds = 0.0;  // Time_train; not written to the predictor file
  std::vector<std::size_t> created_from;
  std::size_t pair_count = 0;
  ClusteringSettings settings;
  std::uint64_t seed = 0;
};

/// Pooled pairs of several groups failed to produce a fit, or some
/// training groups did not converge.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::vector<std::size_t> groups)
      : NumericError(what), groups_(std::move(groups)) {}
  const std::vector<std::size_t>& groups() const noexcept { return groups_; }

 private:
  std::vector<std::size_t> groups_;
};

/// Full-convergence traces of the given groups, in the given order.
std::vector<IterationTrace> run_groups(const Dataset& dataset, const GroupSplit& split,
                                       std::span<const std::size_t> group_ids,
                                       const ClusteringSettings& settings, std::uint64_t seed);

/// Pools (accuracy, change rate) pairs of already-run groups and fits the
/// quadratic. `traces[i]` belongs to `group_ids[i]`.
TrainedPredictor fit_predictor(std::span<const IterationTrace> traces,
                               std::span<const std::size_t> group_ids,
                               const ClusteringSettings& settings, std::uint64_t seed,
                               const std::string& dataset_id);

TrainedPredictor train_predictor(const Dataset& dataset, const GroupSplit& split,
                                 std::span<const std::size_t> training_groups,
                                 const ClusteringSettings& settings, std::uint64_t seed);

/// Deterministic JSON: {beta0, beta1, beta2, diagnostics, algorithm,
/// dataset_id, k, created_from, ...}. Wall-clock time is left out so equal
/// seeds give byte-identical files.
std::string predictor_to_json(const TrainedPredictor& predictor);
TrainedPredictor predictor_from_json(const std::string& text);
void save_predictor(const std::filesystem::path& path, const TrainedPredictor& predictor);
TrainedPredictor load_predictor(const std::filesystem::path& path);

// --- Stopping -------------------------------------------------------------

struct StopPolicy {
  double target_accuracy = 1.0;
  double threshold = 0.0;  // h_j; 0 disables early stopping
  std::size_t min_iterations = 2;
};

StopPolicy make_stop_policy(const QuadraticModel& model, double target_accuracy,
                            std::size_t min_iterations = 2);

/// The rule shared by live and offline stopping. An undefined change rate
/// past iteration 1 means the previous objective was exactly 0, which is
/// treated as convergence.
bool stop_rule_fires(const IterationRecord& record, const StopPolicy& policy);

/// First iteration (1-based) at which the stop rule fires, else the last.
std::size_t locate_stop(const IterationTrace& trace, const StopPolicy& policy);

enum class StopReason { Threshold, Converged, MaxIterations, ZeroObjective };
std::string to_string(StopReason reason);

struct TraceSummaryRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  std::optional<double> change_rate;
};

struct RunReport {
  std::size_t stopped_iteration = 0;
  bool converged_early = false;
  StopReason reason = StopReason::Converged;
  double elapsed_seconds = 0.0;  // Time_actual
  std::vector<TraceSummaryRow> trace_summary;
  Labels final_labels;
  StopPolicy policy;
  IterationTrace trace;
};

RunReport run_with_early_stop(const Dataset& dataset, const ClusteringSettings& settings,
                              std::uint64_t seed, const StopPolicy& policy);

// --- Validation -----------------------------------------------------------

struct ValidationDetail {
  std::size_t group = 0;
  std::size_t fold = 0;
  double target = 0.0;
  double threshold = 0.0;
  std::size_t stop_iteration = 0;
  std::size_t full_iterations = 0;
  double achieved_accuracy = 0.0;
  double iter_fraction = 0.0;
  double time_fraction = 0.0;
  double time_actual_s = 0.0;
  double time_full_s = 0.0;
  std::optional<std::size_t> live_stop_iteration;
};

struct TargetSummary {
  double target = 0.0;
  double threshold = 0.0;  // pooled reports average the per-fold thresholds
  std::size_t groups = 0;
  double mean_accuracy = 0.0;
  double stddev_accuracy = 0.0;  // population standard deviation over groups
  double mean_iter_fraction = 0.0;
  double mean_time_fraction = 0.0;
  double mean_time_actual_s = 0.0;
  double mean_time_full_s = 0.0;
};

struct ValidationReport {
  std::string dataset_id;
  Algorithm algorithm = Algorithm::KMeans;
  std::size_t k = 0;
  std::vector<TargetSummary> summary;   // one row per target, input order
  std::vector<ValidationDetail> details;  // ordered by (group, target)
};

struct ValidationOptions {
  /// Also execute run_with_early_stop per (group, target) and record its stop
  /// iteration next to the offline one.
  bool verify_live = false;
};

/// Aggregates detail rows into one summary row per target.
std::vector<TargetSummary> summarize(std::span<const ValidationDetail> details,
                                     std::span<const double> targets);

/// Stop points located offline in already-run full traces.
ValidationReport validate_traces(const TrainedPredictor& predictor,
                                 std::span<const IterationTrace> traces,
                                 std::span<const std::size_t> group_ids,
                                 std::span<const double> targets);

ValidationReport validate(const TrainedPredictor& predictor, const Dataset& dataset,
                          const GroupSplit& split, std::span<const std::size_t> validation_groups,
                          std::span<const double> targets, ValidationOptions options = {});

struct CrossValidation {
  FoldAssignment assignment;
  std::vector<TrainedPredictor> predictors;  // one per fold
  std::vector<ValidationReport> folds;
  ValidationReport pooled;
};

/// Each group runs to convergence once; fold f trains on the others and
/// validates on f.
CrossValidation cross_validate(const Dataset& dataset, const GroupSplit& split, std::size_t folds,
                               const ClusteringSettings& settings, std::span<const double> targets,
                               std::uint64_t seed, ValidationOptions options = {});

/// Summary JSON holds only deterministic fields; timings go to the timing
/// JSON and CSV.
std::string validation_summary_json(const CrossValidation& cv);
void write_validation_detail_csv(std::ostream& out, const ValidationReport& report);
void write_validation_timing_csv(std::ostream& out, const ValidationReport& report);
std::string validation_timing_json(const CrossValidation& cv);

std::string run_report_json(const RunReport& report, const TrainedPredictor& predictor,
                            const std::string& dataset_id);

}  // namespace tailcut
