#include "tailcut/earlystop.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tailcut/accuracy.hpp"
#include "tailcut/em.hpp"
#include "tailcut/errors.hpp"
#include "tailcut/kmeans.hpp"
#include "tailcut/random.hpp"

namespace tailcut {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

IterationTrace run_clustering(const Dataset& dataset, const ClusteringSettings& settings,
                              std::uint64_t seed, const IterationObserver& observer) {
  switch (settings.algorithm) {
    case Algorithm::KMeans: {
      const KMeansConfig config{settings.k, settings.max_iterations, seed, KMeansInit::UniformSample};
      return run_kmeans(dataset, config, observer).trace;
    }
    case Algorithm::EM: {
      EMConfig config;
      config.k = settings.k;
      config.max_iterations = settings.max_iterations;
      config.seed = seed;
      config.full_convergence_epsilon = settings.em_epsilon;
      config.variance_floor = settings.em_variance_floor;
      return run_em(dataset, config, observer).trace;
    }
  }
  throw ArgumentError("unknown algorithm");
}

std::uint64_t group_seed(std::uint64_t seed, std::size_t group) {
  return derive_seed(seed, static_cast<std::uint64_t>(group));
}

// --- Predictor ------------------------------------------------------------

std::vector<IterationTrace> run_groups(const Dataset& dataset, const GroupSplit& split,
                                       std::span<const std::size_t> group_ids,
                                       const ClusteringSettings& settings, std::uint64_t seed) {
  if (split.dataset_size != dataset.size()) {
    throw ArgumentError("group split was made for a dataset of " +
                        std::to_string(split.dataset_size) + " points, not " +
                        std::to_string(dataset.size()));
  }
  if (settings.k > split.group_size) {
    throw ArgumentError("k (" + std::to_string(settings.k) + ") exceeds group size (" +
                        std::to_string(split.group_size) + ")");
  }
  std::vector<IterationTrace> traces;
  traces.reserve(group_ids.size());
  for (std::size_t g : group_ids) {
    if (g >= split.group_count()) throw ArgumentError("group id " + std::to_string(g) + " out of range");
    const Dataset group = subset(dataset, split.groups[g], dataset.id + "#" + std::to_string(g));
    traces.push_back(run_clustering(group, settings, group_seed(seed, g)));
  }
  return traces;
}

TrainedPredictor fit_predictor(std::span<const IterationTrace> traces,
                               std::span<const std::size_t> group_ids,
                               const ClusteringSettings& settings, std::uint64_t seed,
                               const std::string& dataset_id) {
  if (traces.empty()) throw ArgumentError("no training groups");
  if (traces.size() != group_ids.size()) throw ArgumentError("trace/group count mismatch");
  TrainingPairs pooled;
  std::vector<std::size_t> unconverged;
  double training_time = 0.0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& trace = traces[i];
    if (!trace.records.empty()) training_time += trace.final_record().elapsed_seconds;
    if (!trace.converged()) {
      unconverged.push_back(group_ids[i]);
      continue;
    }
    pooled.append(collect_pairs(trace, trace.final_record().labels, group_ids[i]));
  }
  if (!unconverged.empty()) {
    std::string list;
    for (auto g : unconverged) list += (list.empty() ? "" : ",") + std::to_string(g);
    throw TrainingError("training groups did not converge within max_iterations: " + list,
                        unconverged);
  }
  TrainedPredictor p;
  try {
    p.model = fit_quadratic(pooled);
  } catch (const RankDeficiencyError& e) {
    throw TrainingError(std::string("quadratic fit failed on pooled pairs: ") + e.what(),
                        {group_ids.begin(), group_ids.end()});
  }
  p.algorithm = settings.algorithm;
  p.k = settings.k;
  p.dataset_id = dataset_id;
  p.training_time_seconds = training_time;
  p.created_from.assign(group_ids.begin(), group_ids.end());
  p.pair_count = pooled.size();
  p.settings = settings;
  p.seed = seed;
  return p;
}

TrainedPredictor train_predictor(const Dataset& dataset, const GroupSplit& split,
                                 std::span<const std::size_t> training_groups,
                                 const ClusteringSettings& settings, std::uint64_t seed) {
  if (training_groups.empty()) throw ArgumentError("no training groups");
  const auto traces = run_groups(dataset, split, training_groups, settings, seed);
  return fit_predictor(traces, training_groups, settings, seed, dataset.id);
}

namespace {

ordered_json diagnostics_json(const FitDiagnostics& d) {
  return ordered_json{{"sse", d.sse},
                      {"r_squared", d.r_squared},
                      {"adjusted_r_squared", d.adjusted_r_squared},
                      {"rmse", d.rmse},
                      {"n_points", d.n_points}};
}

FitDiagnostics diagnostics_from(const json& j) {
  FitDiagnostics d;
  d.sse = j.at("sse").get<double>();
  d.r_squared = j.at("r_squared").get<double>();
  d.adjusted_r_squared = j.at("adjusted_r_squared").get<double>();
  d.rmse = j.at("rmse").get<double>();
  d.n_points = j.at("n_points").get<std::size_t>();
  return d;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

std::string predictor_to_json(const TrainedPredictor& p) {
  ordered_json j{{"format", "tailcut-predictor/1"},
                 {"beta0", p.model.beta0},
                 {"beta1", p.model.beta1},
                 {"beta2", p.model.beta2},
                 {"diagnostics", diagnostics_json(p.model.diagnostics)},
                 {"algorithm", to_string(p.algorithm)},
                 {"dataset_id", p.dataset_id},
                 {"k", p.k},
                 {"created_from", p.created_from},
                 {"pair_count", p.pair_count},
                 {"seed", p.seed},
                 {"settings",
                  {{"max_iterations", p.settings.max_iterations},
                   {"em_epsilon", p.settings.em_epsilon},
                   {"em_variance_floor", p.settings.em_variance_floor}}}};
  return j.dump(2) + "\n";
}

TrainedPredictor predictor_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    TrainedPredictor p;
    p.model.beta0 = j.at("beta0").get<double>();
    p.model.beta1 = j.at("beta1").get<double>();
    p.model.beta2 = j.at("beta2").get<double>();
    p.model.diagnostics = diagnostics_from(j.at("diagnostics"));
    p.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    p.k = j.at("k").get<std::size_t>();
    p.dataset_id = j.at("dataset_id").get<std::string>();
    p.created_from = j.at("created_from").get<std::vector<std::size_t>>();
    p.pair_count = j.value("pair_count", std::size_t{0});
    p.seed = j.value("seed", std::uint64_t{0});
    p.settings.algorithm = p.algorithm;
    p.settings.k = p.k;
    if (j.contains("settings")) {
      const auto& s = j.at("settings");
      p.settings.max_iterations = s.value("max_iterations", p.settings.max_iterations);
      p.settings.em_epsilon = s.value("em_epsilon", p.settings.em_epsilon);
      p.settings.em_variance_floor = s.value("em_variance_floor", p.settings.em_variance_floor);
    }
    for (double b : {p.model.beta0, p.model.beta1, p.model.beta2}) {
      if (!std::isfinite(b)) throw DataError("predictor coefficients must be finite");
    }
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed predictor: ") + e.what());
  }
}

void save_predictor(const std::filesystem::path& path, const TrainedPredictor& predictor) {
  write_file(path, predictor_to_json(predictor));
}

TrainedPredictor load_predictor(const std::filesystem::path& path) {
  return predictor_from_json(read_file(path));
}

// --- Stopping -------------------------------------------------------------

StopPolicy make_stop_policy(const QuadraticModel& model, double target_accuracy,
                            std::size_t min_iterations) {
  if (!(target_accuracy > 0.0 && target_accuracy <= 1.0)) {
    throw ArgumentError("target accuracy must be in (0, 1]");
  }
  if (min_iterations < 2) throw ArgumentError("min_iterations must be at least 2");
  return StopPolicy{target_accuracy, threshold_for_accuracy(model, target_accuracy), min_iterations};
}

bool stop_rule_fires(const IterationRecord& record, const StopPolicy& policy) {
  if (record.iteration < std::max<std::size_t>(2, policy.min_iterations)) return false;
  if (!record.change_rate) return true;
  return policy.threshold > 0.0 && *record.change_rate <= policy.threshold;
}

std::size_t locate_stop(const IterationTrace& trace, const StopPolicy& policy) {
  if (trace.records.empty()) throw ArgumentError("empty trace");
  for (const auto& rec : trace.records) {
    if (stop_rule_fires(rec, policy)) return rec.iteration;
  }
  return trace.records.back().iteration;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Threshold: return "threshold";
    case StopReason::Converged: return "converged";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::ZeroObjective: return "zero_objective";
  }
  return "unknown";
}

RunReport run_with_early_stop(const Dataset& dataset, const ClusteringSettings& settings,
                              std::uint64_t seed, const StopPolicy& policy) {
  if (!(policy.target_accuracy > 0.0 && policy.target_accuracy <= 1.0) || !(policy.threshold >= 0.0)) {
    throw ArgumentError("invalid stop policy");
  }
  RunReport report;
  report.policy = policy;
  report.trace = run_clustering(dataset, settings, seed, [&](const IterationRecord& rec) {
    return stop_rule_fires(rec, policy) ? IterationControl::Stop : IterationControl::Continue;
  });
  const auto& last = report.trace.final_record();
  report.stopped_iteration = last.iteration;
  report.elapsed_seconds = last.elapsed_seconds;
  report.final_labels = last.labels;
  switch (report.trace.termination) {
    case Termination::Converged: report.reason = StopReason::Converged; break;
    case Termination::MaxIterations: report.reason = StopReason::MaxIterations; break;
    case Termination::StoppedByObserver:
      report.reason = last.change_rate ? StopReason::Threshold : StopReason::ZeroObjective;
      break;
  }
  report.converged_early = report.reason == StopReason::Threshold;
  for (const auto& rec : report.trace.records) {
    report.trace_summary.push_back({rec.iteration, rec.objective, rec.change_rate});
  }
  return report;
}

// --- Validation -----------------------------------------------------------

std::vector<TargetSummary> summarize(std::span<const ValidationDetail> details,
                                     std::span<const double> targets) {
  std::vector<TargetSummary> out;
  for (double target : targets) {
    TargetSummary s;
    s.target = target;
    std::vector<const ValidationDetail*> rows;
    for (const auto& d : details) {
      if (d.target == target) rows.push_back(&d);
    }
    s.groups = rows.size();
    if (rows.empty()) {
      out.push_back(s);
      continue;
    }
    const double n = static_cast<double>(rows.size());
    for (const auto* d : rows) {
      s.threshold += d->threshold;
      s.mean_accuracy += d->achieved_accuracy;
      s.mean_iter_fraction += d->iter_fraction;
      s.mean_time_fraction += d->time_fraction;
      s.mean_time_actual_s += d->time_actual_s;
      s.mean_time_full_s += d->time_full_s;
    }
    s.threshold /= n;
    s.mean_accuracy /= n;
    s.mean_iter_fraction /= n;
    s.mean_time_fraction /= n;
    s.mean_time_actual_s /= n;
    s.mean_time_full_s /= n;
    double var = 0.0;
    for (const auto* d : rows) var += (d->achieved_accuracy - s.mean_accuracy) * (d->achieved_accuracy - s.mean_accuracy);
    s.stddev_accuracy = std::sqrt(var / n);
    out.push_back(s);
  }
  return out;
}

namespace {

void check_targets(std::span<const double> targets) {
  if (targets.empty()) throw ArgumentError("no target accuracies");
  for (double t : targets) {
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("target accuracies must lie in (0, 1]");
  }
}

void verify_live_stops(ValidationReport& report, const Dataset& dataset, const GroupSplit& split,
                       const ClusteringSettings& settings, std::uint64_t seed) {
  for (auto& d : report.details) {
    const Dataset group = subset(dataset, split.groups[d.group], dataset.id + "#" + std::to_string(d.group));
    const StopPolicy policy{d.target, d.threshold, 2};
    d.live_stop_iteration = run_with_early_stop(group, settings, group_seed(seed, d.group), policy).stopped_iteration;
  }
}

}  // namespace

ValidationReport validate_traces(const TrainedPredictor& predictor,
                                 std::span<const IterationTrace> traces,
                                 std::span<const std::size_t> group_ids,
                                 std::span<const double> targets) {
  if (traces.empty()) throw ArgumentError("empty validation set");
  if (traces.size() != group_ids.size()) throw ArgumentError("trace/group count mismatch");
  check_targets(targets);
  ValidationReport report;
  report.dataset_id = predictor.dataset_id;
  report.algorithm = predictor.algorithm;
  report.k = predictor.k;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& trace = traces[i];
    const auto& final_rec = trace.final_record();
    for (double target : targets) {
      const auto policy = make_stop_policy(predictor.model, target);
      ValidationDetail d;
      d.group = group_ids[i];
      d.target = target;
      d.threshold = policy.threshold;
      d.stop_iteration = locate_stop(trace, policy);
      d.full_iterations = final_rec.iteration;
      const auto& stop_rec = trace.records[d.stop_iteration - 1];
      d.achieved_accuracy = rand_index(stop_rec.labels, final_rec.labels);
      d.iter_fraction = static_cast<double>(d.stop_iteration) / static_cast<double>(d.full_iterations);
      d.time_actual_s = stop_rec.elapsed_seconds;
      d.time_full_s = final_rec.elapsed_seconds;
      d.time_fraction = d.time_full_s > 0.0 ? d.time_actual_s / d.time_full_s : 1.0;
      report.details.push_back(d);
    }
  }
  report.summary = summarize(report.details, targets);
  return report;
}

ValidationReport validate(const TrainedPredictor& predictor, const Dataset& dataset,
                          const GroupSplit& split, std::span<const std::size_t> validation_groups,
                          std::span<const double> targets, ValidationOptions options) {
  if (validation_groups.empty()) throw ArgumentError("empty validation set");
  check_targets(targets);
  auto settings = predictor.settings;
  settings.algorithm = predictor.algorithm;
  settings.k = predictor.k;
  const auto traces = run_groups(dataset, split, validation_groups, settings, predictor.seed);
  auto report = validate_traces(predictor, traces, validation_groups, targets);
  if (options.verify_live) verify_live_stops(report, dataset, split, settings, predictor.seed);
  return report;
}

CrossValidation cross_validate(const Dataset& dataset, const GroupSplit& split, std::size_t folds,
                               const ClusteringSettings& settings, std::span<const double> targets,
                               std::uint64_t seed, ValidationOptions options) {
  check_targets(targets);
  CrossValidation cv;
  cv.assignment = kfold_split(split, folds, derive_seed(seed, 0xf01d));

  std::vector<std::size_t> all(split.group_count());
  for (std::size_t g = 0; g < all.size(); ++g) all[g] = g;
  const auto traces = run_groups(dataset, split, all, settings, seed);

  for (std::size_t f = 0; f < folds; ++f) {
    const auto train_ids = cv.assignment.groups_outside(f);
    const auto valid_ids = cv.assignment.groups_in(f);
    std::vector<IterationTrace> train_traces;
    std::vector<IterationTrace> valid_traces;
    for (auto g : train_ids) train_traces.push_back(traces[g]);
    for (auto g : valid_ids) valid_traces.push_back(traces[g]);

    auto predictor = fit_predictor(train_traces, train_ids, settings, seed, dataset.id);
    auto report = validate_traces(predictor, valid_traces, valid_ids, targets);
    for (auto& d : report.details) d.fold = f;
    if (options.verify_live) verify_live_stops(report, dataset, split, settings, seed);
    cv.predictors.push_back(std::move(predictor));
    cv.folds.push_back(std::move(report));
  }

  cv.pooled.dataset_id = dataset.id;
  cv.pooled.algorithm = settings.algorithm;
  cv.pooled.k = settings.k;
  for (const auto& r : cv.folds) {
    cv.pooled.details.insert(cv.pooled.details.end(), r.details.begin(), r.details.end());
  }
  std::ranges::stable_sort(cv.pooled.details, [](const ValidationDetail& a, const ValidationDetail& b) {
    return a.group < b.group;
  });
  cv.pooled.summary = summarize(cv.pooled.details, targets);
  return cv;
}

// --- Report serialization -------------------------------------------------

namespace {

ordered_json summary_rows(const ValidationReport& r) {
  ordered_json rows = ordered_json::array();
  for (const auto& s : r.summary) {
    rows.push_back({{"target_accuracy", s.target},
                    {"threshold", s.threshold},
                    {"groups", s.groups},
                    {"mean_achieved_accuracy", s.mean_accuracy},
                    {"stddev_achieved_accuracy", s.stddev_accuracy},
                    {"mean_iter_fraction", s.mean_iter_fraction}});
  }
  return rows;
}

ordered_json timing_rows(const ValidationReport& r) {
  ordered_json rows = ordered_json::array();
  for (const auto& s : r.summary) {
    rows.push_back({{"target_accuracy", s.target},
                    {"mean_time_fraction", s.mean_time_fraction},
                    {"mean_time_actual_s", s.mean_time_actual_s},
                    {"mean_time_full_s", s.mean_time_full_s}});
  }
  return rows;
}

std::string fmt17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string validation_summary_json(const CrossValidation& cv) {
  ordered_json folds = ordered_json::array();
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const auto& p = cv.predictors[f];
    folds.push_back({{"fold", f},
                     {"validation_groups", cv.assignment.groups_in(f)},
                     {"predictor", {{"beta0", p.model.beta0}, {"beta1", p.model.beta1}, {"beta2", p.model.beta2},
                                    {"diagnostics", diagnostics_json(p.model.diagnostics)}}},
                     {"summary", summary_rows(cv.folds[f])}});
  }
  ordered_json j{{"format", "tailcut-validation/1"},
                 {"dataset_id", cv.pooled.dataset_id},
                 {"algorithm", to_string(cv.pooled.algorithm)},
                 {"k", cv.pooled.k},
                 {"folds", cv.folds.size()},
                 {"summary", summary_rows(cv.pooled)},
                 {"per_fold", folds}};
  return j.dump(2) + "\n";
}

std::string validation_timing_json(const CrossValidation& cv) {
  double train = 0.0;
  for (const auto& p : cv.predictors) train += p.training_time_seconds;
  ordered_json j{{"format", "tailcut-validation-timing/1"},
                 {"mean_training_time_s", cv.predictors.empty() ? 0.0 : train / static_cast<double>(cv.predictors.size())},
                 {"summary", timing_rows(cv.pooled)}};
  return j.dump(2) + "\n";
}

void write_validation_detail_csv(std::ostream& out, const ValidationReport& report) {
  out << "group_id,fold,target,threshold,stop_iteration,full_iterations,achieved_accuracy,iter_fraction\n";
  for (const auto& d : report.details) {
    out << d.group << ',' << d.fold << ',' << fmt17(d.target) << ',' << fmt17(d.threshold) << ','
        << d.stop_iteration << ',' << d.full_iterations << ',' << fmt17(d.achieved_accuracy) << ','
        << fmt17(d.iter_fraction) << '\n';
  }
}

void write_validation_timing_csv(std::ostream& out, const ValidationReport& report) {
  out << "group_id,target,stop_iteration,time_fraction,time_actual_s,time_full_s\n";
  for (const auto& d : report.details) {
    out << d.group << ',' << fmt17(d.target) << ',' << d.stop_iteration << ','
        << fmt17(d.time_fraction) << ',' << fmt17(d.time_actual_s) << ',' << fmt17(d.time_full_s)
        << '\n';
  }
}

std::string run_report_json(const RunReport& report, const TrainedPredictor& predictor,
                            const std::string& dataset_id) {
  ordered_json summary = ordered_json::array();
  for (const auto& row : report.trace_summary) {
    summary.push_back({{"iteration", row.iteration},
                       {"objective", row.objective},
                       {"change_rate", row.change_rate ? json(*row.change_rate) : json(nullptr)}});
  }
  ordered_json j{{"format", "tailcut-run/1"},
                 {"dataset_id", dataset_id},
                 {"predictor_dataset_id", predictor.dataset_id},
                 {"dataset_mismatch", dataset_id != predictor.dataset_id},
                 {"algorithm", to_string(predictor.algorithm)},
                 {"k", predictor.k},
                 {"target_accuracy", report.policy.target_accuracy},
                 {"threshold", report.policy.threshold},
                 {"min_iterations", report.policy.min_iterations},
                 {"stopped_iteration", report.stopped_iteration},
                 {"converged_early", report.converged_early},
                 {"full_convergence", report.reason == StopReason::Converged},
                 {"stop_reason", to_string(report.reason)},
                 {"elapsed_seconds", report.elapsed_seconds},
                 {"events", report.trace.events.size()},
                 {"trace_summary", summary}};
  return j.dump(2) + "\n";
}

}  // namespace tailcut
