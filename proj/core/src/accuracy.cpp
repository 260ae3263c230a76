#include "tailcut/accuracy.hpp"

#include <unordered_map>
#include <vector>

#include "tailcut/errors.hpp"

namespace tailcut {

namespace {

__extension__ typedef unsigned __int128 u128;

void check_pair(std::span<const Label> p1, std::span<const Label> p2) {
  if (p1.size() != p2.size()) {
    throw ArgumentError("partitions differ in length (" + std::to_string(p1.size()) + " vs " +
                        std::to_string(p2.size()) + ")");
  }
  if (p1.size() < 2) throw ArgumentError("Rand Index needs at least 2 points");
}

u128 choose2(u128 m) { return m < 2 ? 0 : m * (m - 1) / 2; }

/// Maps arbitrary labels onto 0..distinct-1 in order of first appearance.
std::vector<std::uint32_t> compress(std::span<const Label> labels, std::size_t& distinct) {
  std::unordered_map<Label, std::uint32_t> ids;
  std::vector<std::uint32_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto [it, inserted] = ids.try_emplace(labels[i], static_cast<std::uint32_t>(ids.size()));
    out[i] = it->second;
  }
  distinct = ids.size();
  return out;
}

}  // namespace

double PairCounts::rand_index() const noexcept {
  return static_cast<double>(n11 + n00) / static_cast<double>(total());
}

PairCounts pair_counts(std::span<const Label> p1, std::span<const Label> p2) {
  check_pair(p1, p2);
  std::size_t rows = 0;
  std::size_t cols = 0;
  const auto a = compress(p1, rows);
  const auto b = compress(p2, cols);

  std::vector<std::uint64_t> table(rows * cols, 0);
  std::vector<std::uint64_t> row_sums(rows, 0);
  std::vector<std::uint64_t> col_sums(cols, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++table[a[i] * cols + b[i]];
    ++row_sums[a[i]];
    ++col_sums[b[i]];
  }

  u128 together_both = 0;
  for (auto m : table) together_both += choose2(m);
  u128 together_1 = 0;
  for (auto m : row_sums) together_1 += choose2(m);
  u128 together_2 = 0;
  for (auto m : col_sums) together_2 += choose2(m);
  const u128 all = choose2(a.size());

  PairCounts out;
  out.n11 = static_cast<std::uint64_t>(together_both);
  out.n01 = static_cast<std::uint64_t>(together_1 - together_both);
  out.n10 = static_cast<std::uint64_t>(together_2 - together_both);
  out.n00 = static_cast<std::uint64_t>(all - together_1 - together_2 + together_both);
  return out;
}

PairCounts pair_counts_naive(std::span<const Label> p1, std::span<const Label> p2) {
  check_pair(p1, p2);
  if (p1.size() > kNaiveRandIndexLimit) {
    throw ArgumentError("naive Rand Index limited to " + std::to_string(kNaiveRandIndexLimit) +
                        " points");
  }
  PairCounts out;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    for (std::size_t j = i + 1; j < p1.size(); ++j) {
      const bool same1 = p1[i] == p1[j];
      const bool same2 = p2[i] == p2[j];
      if (same1 && same2) {
        ++out.n11;
      } else if (!same1 && !same2) {
        ++out.n00;
      } else if (same1) {
        ++out.n01;
      } else {
        ++out.n10;
      }
    }
  }
  return out;
}

double rand_index(std::span<const Label> p1, std::span<const Label> p2) {
  return pair_counts(p1, p2).rand_index();
}

double rand_index_naive(std::span<const Label> p1, std::span<const Label> p2) {
  return pair_counts_naive(p1, p2).rand_index();
}

}  // namespace tailcut
