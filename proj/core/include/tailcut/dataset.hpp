#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tailcut/matrix.hpp"

namespace tailcut {

/// A set of d-dimensional feature points.
///
/// Invariants (checked by validate()): at least one point, dim > 0, every
/// coordinate finite.
struct Dataset {
  std::string id;
  Matrix points;

  std::size_t size() const noexcept { return points.rows(); }
  std::size_t dim() const noexcept { return points.cols(); }
  std::span<const double> point(std::size_t i) const { return points.row(i); }

  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Rows `indices` of `dataset`, in the given order.
Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices, std::string id = {});

// --- CSV ------------------------------------------------------------------
//
// Comma separated decimal floats, optional single header row, LF or CRLF.
// Blank lines are skipped. Errors carry the 1-based line number.

Dataset parse_csv(std::istream& in, bool has_header, std::string id = {});
Dataset load_csv(const std::filesystem::path& path, bool has_header);

/// Writes one row per point with 17 significant digits, so load_csv
/// reproduces the values exactly.
void write_csv(std::ostream& out, const Dataset& dataset, std::span<const std::string> header = {});
void save_csv(const std::filesystem::path& path, const Dataset& dataset,
              std::span<const std::string> header = {});

// --- Synthetic Gaussian mixtures -----------------------------------------

struct MixtureComponent {
  std::vector<double> mean;
  std::vector<double> stddev;  // per axis, >= 0
  double weight = 1.0;
};

struct SynthSpec {
  std::string id = "synthetic";
  std::size_t n_points = 0;
  std::size_t dim = 0;
  std::vector<MixtureComponent> components;

  /// Throws ArgumentError naming the offending field.
  void validate() const;
};

SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string synth_spec_to_json(const SynthSpec& spec);

struct SyntheticSample {
  Dataset data;
  std::vector<std::uint32_t> component;  // generating component per point
};

/// Points drawn i.i.d. from the axis-aligned mixture. Deterministic in
/// (spec, seed).
SyntheticSample generate_synthetic_labeled(const SynthSpec& spec, std::uint64_t seed);
Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

// --- Sampling groups and folds --------------------------------------------

/// Disjoint fixed-size groups of dataset row indices.
struct GroupSplit {
  std::vector<std::vector<std::size_t>> groups;  // each sorted ascending
  std::size_t group_size = 0;
  std::size_t dataset_size = 0;
  std::uint64_t seed = 0;

  std::size_t group_count() const noexcept { return groups.size(); }
  friend bool operator==(const GroupSplit&, const GroupSplit&) = default;
};

/// floor(n / group_size) groups from a seeded uniform shuffle. The
/// n mod group_size leftover rows are not used.
GroupSplit random_groups(const Dataset& dataset, std::size_t group_size, std::uint64_t seed);
GroupSplit random_groups(std::size_t dataset_size, std::size_t group_size, std::uint64_t seed);

struct FoldAssignment {
  std::vector<std::size_t> fold_of_group;
  std::size_t folds = 0;

  /// Group ids in fold `fold`, ascending.
  std::vector<std::size_t> groups_in(std::size_t fold) const;
  /// Group ids outside fold `fold`, ascending.
  std::vector<std::size_t> groups_outside(std::size_t fold) const;

  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

/// Groups are shuffled by `seed` then dealt round-robin, so fold sizes
/// differ by at most one.
FoldAssignment kfold_split(const GroupSplit& split, std::size_t folds, std::uint64_t seed);

std::string group_split_to_json(const GroupSplit& split);
GroupSplit group_split_from_json(const std::string& text);
std::string fold_assignment_to_json(const FoldAssignment& folds);
FoldAssignment fold_assignment_from_json(const std::string& text);

}  // namespace tailcut
