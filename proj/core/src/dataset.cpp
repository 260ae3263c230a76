#include "tailcut/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tailcut/errors.hpp"
#include "tailcut/random.hpp"

namespace tailcut {

using nlohmann::json;

void Dataset::validate() const {
  if (points.rows() == 0) throw DataError("dataset '" + id + "' has no points");
  if (points.cols() == 0) throw DataError("dataset '" + id + "' has zero dimension");
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (double v : points.row(i)) {
      if (!std::isfinite(v)) {
        throw DataError("dataset '" + id + "': non-finite coordinate in point " + std::to_string(i));
      }
    }
  }
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices, std::string id) {
  Matrix rows(indices.size(), dataset.dim());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= dataset.size()) {
      throw ArgumentError("subset index " + std::to_string(indices[i]) + " out of range");
    }
    std::ranges::copy(dataset.point(indices[i]), rows.row(i).begin());
  }
  return Dataset{id.empty() ? dataset.id : std::move(id), std::move(rows)};
}

// --- CSV ------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t column) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw ParseError("column " + std::to_string(column + 1) + ": '" + std::string(cell) +
                         "' is not a number",
                     row);
  }
  if (!std::isfinite(value)) {
    throw ParseError("column " + std::to_string(column + 1) + ": non-finite value", row);
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

}  // namespace

Dataset parse_csv(std::istream& in, bool has_header, std::string id) {
  Dataset out{std::move(id), {}};
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    values.clear();
    std::string_view rest(line);
    for (std::size_t column = 0;; ++column) {
      const auto comma = rest.find(',');
      values.push_back(parse_cell(rest.substr(0, comma), line_no, column));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (columns == 0) {
      columns = values.size();
    } else if (values.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " fields, found " +
                           std::to_string(values.size()),
                       line_no);
    }
    out.points.append_row(values);
  }
  if (out.points.rows() == 0) throw ParseError("no data rows", 0);
  return out;
}

Dataset load_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  return parse_csv(in, has_header, path.stem().string());
}

void write_csv(std::ostream& out, const Dataset& dataset, std::span<const std::string> header) {
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto p = dataset.point(i);
    for (std::size_t j = 0; j < p.size(); ++j) out << (j ? "," : "") << format_double(p[j]);
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Dataset& dataset,
              std::span<const std::string> header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, dataset, header);
}

// --- Synthetic mixtures ---------------------------------------------------

void SynthSpec::validate() const {
  if (n_points == 0) throw ArgumentError("n_points must be positive");
  if (dim == 0) throw ArgumentError("dim must be positive");
  if (components.empty()) throw ArgumentError("components must be non-empty");
  double total = 0.0;
  for (std::size_t c = 0; c < components.size(); ++c) {
    const auto& comp = components[c];
    const std::string where = "components[" + std::to_string(c) + "]";
    if (comp.mean.size() != dim) throw ArgumentError(where + ".mean must have length dim");
    if (comp.stddev.size() != dim) throw ArgumentError(where + ".stddev must have length dim");
    for (double m : comp.mean) {
      if (!std::isfinite(m)) throw ArgumentError(where + ".mean must be finite");
    }
    for (double s : comp.stddev) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw ArgumentError(where + ".stddev must be finite and non-negative");
      }
    }
    if (!(comp.weight > 0.0)) throw ArgumentError(where + ".weight must be positive");
    total += comp.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("weight: component weights must sum to 1");
}

namespace {

template <typename T>
T require(const json& j, const char* field, const std::string& where = {}) {
  const std::string name = where.empty() ? field : where + "." + field;
  if (!j.is_object() || !j.contains(field)) throw ArgumentError("missing field '" + name + "'");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw ArgumentError("field '" + name + "' has the wrong type");
  }
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("synth spec is not valid JSON: ") + e.what());
  }
  SynthSpec spec;
  if (j.is_object() && j.contains("id")) spec.id = require<std::string>(j, "id");
  spec.n_points = require<std::size_t>(j, "n_points");
  spec.dim = require<std::size_t>(j, "dim");
  const auto comps = require<json>(j, "components");
  if (!comps.is_array()) throw ArgumentError("field 'components' must be an array");
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const std::string where = "components[" + std::to_string(c) + "]";
    MixtureComponent mc;
    mc.mean = require<std::vector<double>>(comps[c], "mean", where);
    mc.stddev = require<std::vector<double>>(comps[c], "stddev", where);
    mc.weight = require<double>(comps[c], "weight", where);
    spec.components.push_back(std::move(mc));
  }
  spec.validate();
  return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_synth_spec(ss.str());
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  json comps = json::array();
  for (const auto& c : spec.components) {
    comps.push_back({{"mean", c.mean}, {"stddev", c.stddev}, {"weight", c.weight}});
  }
  return json{{"id", spec.id}, {"n_points", spec.n_points}, {"dim", spec.dim}, {"components", comps}}
      .dump(2);
}

SyntheticSample generate_synthetic_labeled(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : spec.components) cumulative.push_back(acc += c.weight);

  SyntheticSample out{Dataset{spec.id, Matrix(spec.n_points, spec.dim)}, {}};
  out.component.resize(spec.n_points);
  for (std::size_t i = 0; i < spec.n_points; ++i) {
    const double u = rng.uniform01() * acc;
    const auto it = std::ranges::upper_bound(cumulative, u);
    const auto c = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                         spec.components.size() - 1);
    out.component[i] = static_cast<std::uint32_t>(c);
    const auto& comp = spec.components[c];
    auto row = out.data.points.row(i);
    for (std::size_t j = 0; j < spec.dim; ++j) row[j] = comp.mean[j] + comp.stddev[j] * rng.normal();
  }
  return out;
}

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  return generate_synthetic_labeled(spec, seed).data;
}

// --- Groups and folds -----------------------------------------------------

GroupSplit random_groups(std::size_t dataset_size, std::size_t group_size, std::uint64_t seed) {
  if (group_size < 2) throw ArgumentError("group size must be at least 2");
  if (group_size > dataset_size) {
    throw ArgumentError("group size " + std::to_string(group_size) + " exceeds dataset size " +
                        std::to_string(dataset_size));
  }
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));

  GroupSplit split;
  split.group_size = group_size;
  split.dataset_size = dataset_size;
  split.seed = seed;
  const std::size_t count = dataset_size / group_size;
  split.groups.reserve(count);
  for (std::size_t g = 0; g < count; ++g) {
    std::vector<std::size_t> members(order.begin() + g * group_size,
                                     order.begin() + (g + 1) * group_size);
    std::ranges::sort(members);
    split.groups.push_back(std::move(members));
  }
  return split;
}

GroupSplit random_groups(const Dataset& dataset, std::size_t group_size, std::uint64_t seed) {
  return random_groups(dataset.size(), group_size, seed);
}

std::vector<std::size_t> FoldAssignment::groups_in(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < fold_of_group.size(); ++g) {
    if (fold_of_group[g] == fold) out.push_back(g);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::groups_outside(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < fold_of_group.size(); ++g) {
    if (fold_of_group[g] != fold) out.push_back(g);
  }
  return out;
}

FoldAssignment kfold_split(const GroupSplit& split, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ArgumentError("folds must be at least 2");
  if (folds > split.group_count()) {
    throw ArgumentError("folds (" + std::to_string(folds) + ") exceed group count (" +
                        std::to_string(split.group_count()) + ")");
  }
  std::vector<std::size_t> order(split.group_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));
  FoldAssignment out{std::vector<std::size_t>(order.size()), folds};
  for (std::size_t i = 0; i < order.size(); ++i) out.fold_of_group[order[i]] = i % folds;
  return out;
}

std::string group_split_to_json(const GroupSplit& split) {
  return json{{"seed", split.seed},
              {"group_size", split.group_size},
              {"dataset_size", split.dataset_size},
              {"groups", split.groups}}
      .dump();
}

GroupSplit group_split_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    GroupSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.group_size = j.at("group_size").get<std::size_t>();
    s.dataset_size = j.at("dataset_size").get<std::size_t>();
    s.groups = j.at("groups").get<std::vector<std::vector<std::size_t>>>();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed group split: ") + e.what());
  }
}

std::string fold_assignment_to_json(const FoldAssignment& folds) {
  return json{{"folds", folds.folds}, {"fold_of_group", folds.fold_of_group}}.dump();
}

FoldAssignment fold_assignment_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    return FoldAssignment{j.at("fold_of_group").get<std::vector<std::size_t>>(),
                          j.at("folds").get<std::size_t>()};
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fold assignment: ") + e.what());
  }
}

}  // namespace tailcut
