#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tailcut/cost.hpp"
#include "tailcut/dataset.hpp"
#include "tailcut/earlystop.hpp"
#include "tailcut/errors.hpp"
#include "tailcut/random.hpp"
#include "tailcut/trace.hpp"

namespace tailcut::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

namespace {

constexpr const char* kToolVersion = "tailcut 0.1.0";

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

/// Re-executable record of a command. Only `timestamp` varies between
/// identical invocations, plus any wall-clock fields in `measurements`.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  ordered_json parameters = ordered_json::object();
  ordered_json inputs = ordered_json::object();
  ordered_json outputs = ordered_json::object();
  ordered_json measurements = ordered_json::object();

  void save(const fs::path& path) const {
    const ordered_json j{{"command", command},  {"argv", argv},
                         {"parameters", parameters}, {"inputs", inputs},
                         {"outputs", outputs},   {"measurements", measurements},
                         {"tool_version", kToolVersion}, {"timestamp", utc_timestamp()}};
    write_text(path, j.dump(2) + "\n");
  }
};

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  return fs::path(p.string() + suffix);
}

std::string fmt_g(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::vector<double> parse_targets(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ArgumentError("--targets: '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ArgumentError("--targets is empty");
  for (double t : out) {
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("--targets values must lie in (0, 1]");
  }
  return out;
}

Dataset load_data(const std::string& path, bool header) {
  auto data = load_csv(path, header);
  data.validate();
  return data;
}

// --- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::uint64_t seed = 0;
  std::string out;
  std::string components_out;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto spec = load_synth_spec(a.spec);
  const auto sample = generate_synthetic_labeled(spec, a.seed);
  save_csv(a.out, sample.data);
  RunManifest m{"synth", argv};
  m.parameters = {{"seed", a.seed}};
  m.inputs = {{"spec", a.spec}};
  m.outputs = {{"data", a.out}};
  if (!a.components_out.empty()) {
    std::ostringstream os;
    for (auto c : sample.component) os << c << '\n';
    write_text(a.components_out, os.str());
    m.outputs["components"] = a.components_out;
  }
  m.save(with_suffix(a.out, ".manifest.json"));
  out << "wrote " << sample.data.size() << " points to " << a.out << '\n';
  return kExitOk;
}

// --- train ----------------------------------------------------------------

struct CommonClusterArgs {
  std::string algorithm = "kmeans";
  std::size_t k = 2;
  std::size_t max_iterations = 500;
  double em_epsilon = 1e-8;
  double em_variance_floor = 1e-6;

  ClusteringSettings settings() const {
    ClusteringSettings s;
    s.algorithm = parse_algorithm(algorithm);
    s.k = k;
    s.max_iterations = max_iterations;
    s.em_epsilon = em_epsilon;
    s.em_variance_floor = em_variance_floor;
    if (s.k == 0) throw ArgumentError("--k must be positive");
    if (s.max_iterations == 0) throw ArgumentError("--max-iterations must be positive");
    return s;
  }
};

void add_cluster_options(CLI::App* app, CommonClusterArgs& c) {
  app->add_option("--algorithm", c.algorithm, "kmeans or em")->capture_default_str();
  app->add_option("--k", c.k, "Number of clusters")->required();
  app->add_option("--max-iterations", c.max_iterations, "Safety bound per run")->capture_default_str();
  app->add_option("--em-epsilon", c.em_epsilon, "EM relative log-likelihood convergence")
      ->capture_default_str();
  app->add_option("--em-variance-floor", c.em_variance_floor,
                  "EM variance floor as a fraction of global variance")
      ->capture_default_str();
}

ordered_json settings_json(const ClusteringSettings& s) {
  return {{"algorithm", to_string(s.algorithm)},
          {"k", s.k},
          {"max_iterations", s.max_iterations},
          {"em_epsilon", s.em_epsilon},
          {"em_variance_floor", s.em_variance_floor}};
}

struct TrainArgs {
  std::string data;
  bool header = false;
  CommonClusterArgs cluster;
  std::size_t group_size = 0;
  std::size_t groups = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto settings = a.cluster.settings();
  if (settings.k > a.group_size) {
    throw ArgumentError("--k (" + std::to_string(settings.k) + ") exceeds --group-size (" +
                        std::to_string(a.group_size) + ")");
  }
  const auto data = load_data(a.data, a.header);
  const auto split = random_groups(data, a.group_size, derive_seed(a.seed, 1));
  std::size_t use = a.groups == 0 ? split.group_count() : a.groups;
  if (use > split.group_count()) {
    throw ArgumentError("--groups " + std::to_string(use) + " exceeds the " +
                        std::to_string(split.group_count()) + " available groups");
  }
  std::vector<std::size_t> ids(use);
  for (std::size_t g = 0; g < use; ++g) ids[g] = g;
  const auto predictor = train_predictor(data, split, ids, settings, derive_seed(a.seed, 2));
  save_predictor(a.out, predictor);

  RunManifest m{"train", argv};
  m.parameters = settings_json(settings);
  m.parameters["group_size"] = a.group_size;
  m.parameters["groups"] = use;
  m.parameters["seed"] = a.seed;
  m.inputs = {{"data", a.data}};
  m.outputs = {{"predictor", a.out}};
  m.measurements["training_time_seconds"] = predictor.training_time_seconds;
  m.save(with_suffix(a.out, ".manifest.json"));

  const auto term = [](double v) { return std::string(v < 0 ? " - " : " + ") + fmt_g(std::abs(v)); };
  out << "predictor: h = " << fmt_g(predictor.model.beta0) << term(predictor.model.beta1) << " r"
      << term(predictor.model.beta2) << " r^2  (R^2 " << predictor.model.diagnostics.r_squared << ", "
      << predictor.pair_count << " pairs from " << use << " groups)\n";
  return kExitOk;
}

// --- cluster --------------------------------------------------------------

struct ClusterArgs {
  std::string data;
  bool header = false;
  std::string predictor;
  std::string algorithm;
  double target = 0.99;
  std::size_t min_iterations = 2;
  std::uint64_t seed = 0;
  std::string labels_out;
  std::string report_out;
  std::string trace_out;
};

int cmd_cluster(const ClusterArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (!(a.target > 0.0 && a.target <= 1.0)) throw ArgumentError("--target-accuracy must lie in (0, 1]");
  const auto predictor = load_predictor(a.predictor);
  if (!a.algorithm.empty() && parse_algorithm(a.algorithm) != predictor.algorithm) {
    throw ArgumentError("--algorithm " + a.algorithm + " does not match the predictor's " +
                        to_string(predictor.algorithm));
  }
  const auto data = load_data(a.data, a.header);
  if (predictor.k > data.size()) {
    throw ArgumentError("predictor k (" + std::to_string(predictor.k) + ") exceeds data size (" +
                        std::to_string(data.size()) + ")");
  }
  auto settings = predictor.settings;
  settings.algorithm = predictor.algorithm;
  settings.k = predictor.k;
  const auto policy = make_stop_policy(predictor.model, a.target, a.min_iterations);
  const auto report = run_with_early_stop(data, settings, a.seed, policy);

  std::ostringstream labels;
  for (auto l : report.final_labels) labels << l << '\n';
  write_text(a.labels_out, labels.str());
  write_text(a.report_out, run_report_json(report, predictor, data.id));

  RunManifest m{"cluster", argv};
  m.parameters = settings_json(settings);
  m.parameters["target_accuracy"] = a.target;
  m.parameters["min_iterations"] = a.min_iterations;
  m.parameters["seed"] = a.seed;
  m.inputs = {{"data", a.data}, {"predictor", a.predictor}};
  m.outputs = {{"labels", a.labels_out}, {"report", a.report_out}};
  if (!a.trace_out.empty()) {
    save_trace_csv(a.trace_out, report.trace);
    save_label_snapshots(with_suffix(a.trace_out, ".labels.json"), report.trace);
    m.outputs["trace"] = a.trace_out;
    m.outputs["trace_labels"] = a.trace_out + ".labels.json";
  }
  m.measurements["elapsed_seconds"] = report.elapsed_seconds;
  m.save(with_suffix(a.report_out, ".manifest.json"));
  if (data.id != predictor.dataset_id) {
    out << "note: predictor was trained on '" << predictor.dataset_id << "', data is '" << data.id
        << "'\n";
  }
  out << "stopped at iteration " << report.stopped_iteration << " (" << to_string(report.reason)
      << ", threshold " << policy.threshold << ")\n";
  return kExitOk;
}

// --- validate -------------------------------------------------------------

struct ValidateArgs {
  std::string data;
  bool header = false;
  CommonClusterArgs cluster;
  std::size_t group_size = 0;
  std::size_t folds = 10;
  std::string targets = "0.9,0.95,0.99,0.999";
  std::uint64_t seed = 0;
  std::string out_dir;
  bool verify_live = false;
};

int cmd_validate(const ValidateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto settings = a.cluster.settings();
  const auto targets = parse_targets(a.targets);
  if (settings.k > a.group_size) {
    throw ArgumentError("--k (" + std::to_string(settings.k) + ") exceeds --group-size (" +
                        std::to_string(a.group_size) + ")");
  }
  const auto data = load_data(a.data, a.header);
  const auto split = random_groups(data, a.group_size, derive_seed(a.seed, 1));
  if (a.folds < 2 || a.folds > split.group_count()) {
    throw ArgumentError("--folds must lie in [2, " + std::to_string(split.group_count()) +
                        "] for this split");
  }
  const auto cv = cross_validate(data, split, a.folds, settings, targets, derive_seed(a.seed, 2),
                                 ValidationOptions{a.verify_live});

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_text(dir / "summary.json", validation_summary_json(cv));
  {
    std::ostringstream os;
    write_validation_detail_csv(os, cv.pooled);
    write_text(dir / "detail.csv", os.str());
  }
  {
    std::ostringstream os;
    write_validation_timing_csv(os, cv.pooled);
    write_text(dir / "timing.csv", os.str());
  }
  write_text(dir / "timing.json", validation_timing_json(cv));
  write_text(dir / "groups.json", group_split_to_json(split) + "\n");
  write_text(dir / "folds.json", fold_assignment_to_json(cv.assignment) + "\n");

  RunManifest m{"validate", argv};
  m.parameters = settings_json(settings);
  m.parameters["group_size"] = a.group_size;
  m.parameters["folds"] = a.folds;
  m.parameters["targets"] = targets;
  m.parameters["seed"] = a.seed;
  m.inputs = {{"data", a.data}};
  m.outputs = {{"summary", (dir / "summary.json").string()},
               {"detail", (dir / "detail.csv").string()},
               {"timing", (dir / "timing.json").string()},
               {"timing_detail", (dir / "timing.csv").string()}};
  if (a.verify_live) {
    std::size_t mismatches = 0;
    for (const auto& d : cv.pooled.details) {
      if (d.live_stop_iteration && *d.live_stop_iteration != d.stop_iteration) ++mismatches;
    }
    m.measurements["live_stop_mismatches"] = mismatches;
  }
  m.save(dir / "manifest.json");

  out << "target   groups  achieved(mean)  achieved(sd)  iter_frac  time_frac\n";
  for (const auto& s : cv.pooled.summary) {
    char line[128];
    std::snprintf(line, sizeof line, "%-8.4g %6zu  %14.4f  %12.4f  %9.4f  %9.4f\n", s.target,
                  s.groups, s.mean_accuracy, s.stddev_accuracy, s.mean_iter_fraction,
                  s.mean_time_fraction);
    out << line;
  }
  return kExitOk;
}

// --- report ---------------------------------------------------------------

struct ReportArgs {
  std::string input;
  std::string prices;
  std::string instance = "m5.large";
  std::string out;
  double train_seconds = -1.0;
  double full_seconds = -1.0;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto prices = load_price_table(a.prices);
  json in;
  try {
    in = json::parse(read_text(a.input));
  } catch (const json::parse_error& e) {
    throw DataError(std::string("report input is not valid JSON: ") + e.what());
  }
  const std::string format = in.value("format", std::string());
  std::string text;
  try {
    if (format == "tailcut-validation-timing/1") {
      const double train = a.train_seconds >= 0.0 ? a.train_seconds : in.at("mean_training_time_s").get<double>();
      ordered_json reports = ordered_json::array();
      for (const auto& row : in.at("summary")) {
        const RunTimes t{train, row.at("mean_time_actual_s").get<double>(),
                         row.at("mean_time_full_s").get<double>()};
        const auto r = build_cost_report(t, prices, a.instance);
        out << "target accuracy " << row.at("target_accuracy").get<double>() << '\n'
            << format_cost_report(r) << '\n';
        reports.push_back({{"target_accuracy", row.at("target_accuracy")},
                           {"report", ordered_json::parse(cost_report_to_json(r))}});
      }
      text = ordered_json{{"format", "tailcut-cost-set/1"}, {"reports", reports}}.dump(2) + "\n";
    } else {
      RunTimes t;
      if (format == "tailcut-run/1") {
        t.actual_s = in.at("elapsed_seconds").get<double>();
        t.full_s = a.full_seconds;
        t.train_s = a.train_seconds >= 0.0 ? a.train_seconds : 0.0;
        if (t.full_s < 0.0) throw ArgumentError("a run report needs --full-seconds");
      } else {
        t.train_s = in.value("time_train_s", 0.0);
        t.actual_s = in.at("time_actual_s").get<double>();
        t.full_s = in.at("time_full_s").get<double>();
        if (a.train_seconds >= 0.0) t.train_s = a.train_seconds;
        if (a.full_seconds >= 0.0) t.full_s = a.full_seconds;
      }
      const auto r = build_cost_report(t, prices, a.instance);
      out << format_cost_report(r);
      text = cost_report_to_json(r);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("report input is missing timing fields: ") + e.what());
  }
  if (!a.out.empty()) write_text(a.out, text);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"tailcut: early-stopped k-means/EM clustering with cost reporting", "tailcut"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a Gaussian-mixture CSV dataset");
  synth_cmd->add_option("--spec", synth.spec, "Mixture spec JSON")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output CSV")->required();
  synth_cmd->add_option("--components-out", synth.components_out,
                        "Optional file with the generating component per row");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fit the change-rate/accuracy predictor");
  train_cmd->add_option("data", train.data, "Input CSV")->required();
  train_cmd->add_flag("--header", train.header, "First CSV row is a header");
  add_cluster_options(train_cmd, train.cluster);
  train_cmd->add_option("--group-size", train.group_size, "Points per sampling group")->required();
  train_cmd->add_option("--groups", train.groups, "Number of groups to train on (0 = all)")
      ->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Predictor JSON")->required();

  ClusterArgs cluster;
  auto* cluster_cmd = app.add_subcommand("cluster", "Cluster with early stopping");
  cluster_cmd->add_option("data", cluster.data, "Input CSV")->required();
  cluster_cmd->add_flag("--header", cluster.header, "First CSV row is a header");
  cluster_cmd->add_option("--predictor", cluster.predictor, "Predictor JSON")->required();
  cluster_cmd->add_option("--algorithm", cluster.algorithm, "Must match the predictor if given");
  cluster_cmd->add_option("--target-accuracy", cluster.target, "Desired accuracy in (0, 1]")
      ->capture_default_str();
  cluster_cmd->add_option("--min-iterations", cluster.min_iterations, "Earliest stop iteration (>= 2)")
      ->capture_default_str();
  cluster_cmd->add_option("--seed", cluster.seed, "Random seed")->capture_default_str();
  cluster_cmd->add_option("--labels-out", cluster.labels_out, "One label per input row")->required();
  cluster_cmd->add_option("--report-out", cluster.report_out, "Run report JSON")->required();
  cluster_cmd->add_option("--trace-out", cluster.trace_out,
                          "Trace CSV (label snapshots go to <path>.labels.json)");

  ValidateArgs validate;
  auto* validate_cmd = app.add_subcommand("validate", "Cross-validate early stopping");
  validate_cmd->add_option("data", validate.data, "Input CSV")->required();
  validate_cmd->add_flag("--header", validate.header, "First CSV row is a header");
  add_cluster_options(validate_cmd, validate.cluster);
  validate_cmd->add_option("--group-size", validate.group_size, "Points per sampling group")->required();
  validate_cmd->add_option("--folds", validate.folds, "Cross-validation folds")->capture_default_str();
  validate_cmd->add_option("--targets", validate.targets, "Comma-separated target accuracies")
      ->capture_default_str();
  validate_cmd->add_option("--seed", validate.seed, "Random seed")->capture_default_str();
  validate_cmd->add_option("--out-dir", validate.out_dir, "Output directory")->required();
  validate_cmd->add_flag("--verify-live", validate.verify_live,
                         "Re-run each group with live early stopping and compare stop points");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Cost report from timings");
  report_cmd->add_option("input", report.input,
                         "Times JSON, run report JSON, or validation timing.json")
      ->required();
  report_cmd->add_option("--prices", report.prices, "Price table JSON")->required();
  report_cmd->add_option("--instance", report.instance, "Instance type")->capture_default_str();
  report_cmd->add_option("--out", report.out, "Cost report JSON");
  report_cmd->add_option("--train-seconds", report.train_seconds, "Override Time_train");
  report_cmd->add_option("--full-seconds", report.full_seconds, "Override Time_full");

  auto* prices_cmd = app.add_subcommand("prices", "Print the built-in price table as JSON");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitArgument;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth, args, out);
    if (train_cmd->parsed()) return cmd_train(train, args, out);
    if (cluster_cmd->parsed()) return cmd_cluster(cluster, args, out);
    if (validate_cmd->parsed()) return cmd_validate(validate, args, out);
    if (report_cmd->parsed()) return cmd_report(report, out);
    if (prices_cmd->parsed()) {
      out << price_table_to_json(default_price_table());
      return kExitOk;
    }
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitArgument;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace tailcut::cli
