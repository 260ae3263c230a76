#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tailcut {

using Label = std::uint32_t;
using Labels = std::vector<Label>;

enum class Algorithm { KMeans, EM };

std::string to_string(Algorithm algorithm);
/// Accepts "kmeans"/"k-means" and "em" (case-insensitive).
Algorithm parse_algorithm(std::string_view name);

/// One completed clustering iteration. Iterations are numbered from 1.
struct IterationRecord {
  std::size_t iteration = 0;
  double objective = 0.0;             // J_i: SSE for k-means, log-likelihood for EM
  std::optional<double> change_rate;  // h_i; absent for i = 1 or when J_{i-1} = 0
  double elapsed_seconds = 0.0;       // since the start of the run, monotonic clock
  bool converged = false;             // the algorithm's own convergence test fired here
  Labels labels;                      // partition P_i
};

enum class Termination { Converged, MaxIterations, StoppedByObserver };

std::string to_string(Termination termination);

/// Something noteworthy the algorithm did mid-run (empty-cluster repair,
/// degenerate EM component reinitialization).
struct RunEvent {
  std::size_t iteration = 0;
  std::string kind;
  std::string detail;
};

struct IterationTrace {
  Algorithm algorithm = Algorithm::KMeans;
  std::vector<IterationRecord> records;
  Termination termination = Termination::MaxIterations;
  std::vector<RunEvent> events;

  bool converged() const noexcept { return termination == Termination::Converged; }
  std::size_t iterations() const noexcept { return records.size(); }
  const IterationRecord& final_record() const { return records.back(); }
};

enum class IterationControl { Continue, Stop };

/// Called synchronously after every iteration; returning Stop ends the run.
using IterationObserver = std::function<IterationControl(const IterationRecord&)>;

/// Trace CSV: iteration,objective,change_rate,elapsed_seconds. change_rate
/// is empty when undefined.
void write_trace_csv(std::ostream& out, const IterationTrace& trace);
void save_trace_csv(const std::filesystem::path& path, const IterationTrace& trace);

/// Label snapshots sidecar: {"algorithm", "termination", "events",
/// "labels": [[...per iteration...]]}.
void save_label_snapshots(const std::filesystem::path& path, const IterationTrace& trace);

/// Reads a trace CSV and its label sidecar back into a trace. Elapsed times
/// and objectives round-trip exactly.
IterationTrace load_trace(const std::filesystem::path& csv_path,
                          const std::filesystem::path& labels_path);

}  // namespace tailcut
