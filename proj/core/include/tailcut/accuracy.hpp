#pragma once

#include <cstdint>
#include <span>

#include "tailcut/trace.hpp"

namespace tailcut {

/// Pair agreement counts between two partitions of the same n points.
/// n11: together in both; n00: apart in both; n01: together only in the
/// first; n10: together only in the second. They sum to n(n-1)/2.
struct PairCounts {
  std::uint64_t n11 = 0;
  std::uint64_t n00 = 0;
  std::uint64_t n01 = 0;
  std::uint64_t n10 = 0;

  std::uint64_t total() const noexcept { return n11 + n00 + n01 + n10; }
  /// (n11 + n00) / total, one floating division.
  double rand_index() const noexcept;

  friend bool operator==(const PairCounts&, const PairCounts&) = default;
};

/// Contingency-table counts, O(n + |labels1| * |labels2|). Labels need not
/// be contiguous.
PairCounts pair_counts(std::span<const Label> p1, std::span<const Label> p2);

/// Enumerates all pairs. Refuses n > 10'000.
PairCounts pair_counts_naive(std::span<const Label> p1, std::span<const Label> p2);

inline constexpr std::size_t kNaiveRandIndexLimit = 10'000;

double rand_index(std::span<const Label> p1, std::span<const Label> p2);
double rand_index_naive(std::span<const Label> p1, std::span<const Label> p2);

}  // namespace tailcut
