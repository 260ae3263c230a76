#include "tailcut/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tailcut/errors.hpp"

namespace tailcut {

using nlohmann::json;

std::string to_string(Algorithm algorithm) {
  return algorithm == Algorithm::KMeans ? "kmeans" : "em";
}

Algorithm parse_algorithm(std::string_view name) {
  std::string lower(name);
  std::ranges::transform(lower, lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "kmeans" || lower == "k-means") return Algorithm::KMeans;
  if (lower == "em") return Algorithm::EM;
  throw ArgumentError("unknown algorithm '" + std::string(name) + "' (expected kmeans or em)");
}

std::string to_string(Termination termination) {
  switch (termination) {
    case Termination::Converged: return "converged";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::StoppedByObserver: return "stopped";
  }
  return "unknown";
}

namespace {

std::string fmt17(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, std::size_t row) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("bad number '" + std::string(s) + "' in trace", row);
  }
  return v;
}

Termination parse_termination(const std::string& s) {
  if (s == "converged") return Termination::Converged;
  if (s == "max_iterations") return Termination::MaxIterations;
  if (s == "stopped") return Termination::StoppedByObserver;
  throw DataError("unknown termination '" + s + "'");
}

}  // namespace

void write_trace_csv(std::ostream& out, const IterationTrace& trace) {
  out << "iteration,objective,change_rate,elapsed_seconds\n";
  for (const auto& r : trace.records) {
    out << r.iteration << ',' << fmt17(r.objective) << ','
        << (r.change_rate ? fmt17(*r.change_rate) : std::string()) << ','
        << fmt17(r.elapsed_seconds) << '\n';
  }
}

void save_trace_csv(const std::filesystem::path& path, const IterationTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_trace_csv(out, trace);
}

void save_label_snapshots(const std::filesystem::path& path, const IterationTrace& trace) {
  json events = json::array();
  for (const auto& e : trace.events) {
    events.push_back({{"iteration", e.iteration}, {"kind", e.kind}, {"detail", e.detail}});
  }
  json labels = json::array();
  for (const auto& r : trace.records) labels.push_back(r.labels);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << json{{"algorithm", to_string(trace.algorithm)},
              {"termination", to_string(trace.termination)},
              {"events", events},
              {"labels", labels}}
             .dump()
      << '\n';
}

IterationTrace load_trace(const std::filesystem::path& csv_path,
                          const std::filesystem::path& labels_path) {
  IterationTrace trace;
  std::ifstream csv(csv_path, std::ios::binary);
  if (!csv) throw DataError("cannot open '" + csv_path.string() + "'");
  std::string line;
  std::size_t row = 0;
  while (std::getline(csv, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1 || line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != 4) throw ParseError("expected 4 trace columns", row);
    IterationRecord r;
    r.iteration = static_cast<std::size_t>(parse_double(cells[0], row));
    r.objective = parse_double(cells[1], row);
    if (!cells[2].empty()) r.change_rate = parse_double(cells[2], row);
    r.elapsed_seconds = parse_double(cells[3], row);
    trace.records.push_back(std::move(r));
  }

  std::ifstream side(labels_path, std::ios::binary);
  if (!side) throw DataError("cannot open '" + labels_path.string() + "'");
  try {
    const auto j = json::parse(side);
    trace.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    trace.termination = parse_termination(j.at("termination").get<std::string>());
    for (const auto& e : j.at("events")) {
      trace.events.push_back({e.at("iteration").get<std::size_t>(), e.at("kind").get<std::string>(),
                              e.at("detail").get<std::string>()});
    }
    const auto& labels = j.at("labels");
    if (labels.size() != trace.records.size()) {
      throw DataError("label sidecar has " + std::to_string(labels.size()) +
                      " snapshots for " + std::to_string(trace.records.size()) + " iterations");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      trace.records[i].labels = labels[i].get<Labels>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed label sidecar: ") + e.what());
  }
  if (!trace.records.empty() && trace.termination == Termination::Converged) {
    trace.records.back().converged = true;
  }
  return trace;
}

}  // namespace tailcut
