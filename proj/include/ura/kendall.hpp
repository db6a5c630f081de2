#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ura/errors.hpp"

namespace ura {

struct KendallResult {
  double tau = 0.0;
  /// True when either sequence is entirely tied, which leaves the
  /// tie-corrected denominator zero; tau is reported as 0 in that case.
  bool degenerate = false;
};

namespace detail {

// Counts inversions in v by merge sort. Equal elements are not inversions.
inline std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf,
                                std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = (lo + hi) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

template <class Pred>
inline std::int64_t tie_pairs(const std::vector<double>& a, const std::vector<double>& b,
                              const std::vector<int>& order, Pred same) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= order.size(); ++i) {
    if (i < order.size() && same(order[i - 1], order[i], a, b)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace detail

/// Tie-corrected rank correlation (tau-b) of two equal-length sequences,
/// computed with Knight's merge-counting algorithm:
///   tau = (n0 - n1 - n2 + n3 - 2 * swaps) / (sqrt(n0 - n1) * sqrt(n0 - n2))
/// where n0 is the total pair count, n1/n2 the within-ties of each sequence,
/// n3 the joint ties, and swaps the discordant pairs.
inline KendallResult kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("kendall_tau: length mismatch");
  if (a.size() < 2) throw ConfigError("kendall_tau: need at least two observations");
  const std::int64_t n = static_cast<std::int64_t>(a.size());

  std::vector<int> order(a.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (a[i] != a[j]) return a[i] < a[j];
    return b[i] < b[j];
  });

  const std::int64_t n0 = n * (n - 1) / 2;
  const std::int64_t n1 = detail::tie_pairs(
      a, b, order, [](int i, int j, const auto& x, const auto&) { return x[i] == x[j]; });
  const std::int64_t n3 = detail::tie_pairs(a, b, order,
                                            [](int i, int j, const auto& x, const auto& y) {
                                              return x[i] == x[j] && y[i] == y[j];
                                            });

  std::vector<double> b_sorted(a.size());
  for (std::size_t i = 0; i < order.size(); ++i) b_sorted[i] = b[order[i]];
  std::vector<double> buf(b_sorted.size());
  const std::int64_t swaps = detail::merge_count(b_sorted, buf, 0, b_sorted.size());

  std::vector<int> order_b(order);
  std::sort(order_b.begin(), order_b.end(), [&](int i, int j) { return b[i] < b[j]; });
  const std::int64_t n2 = detail::tie_pairs(
      a, b, order_b, [](int i, int j, const auto&, const auto& y) { return y[i] == y[j]; });

  if (n0 == n1 || n0 == n2) return {0.0, true};
  const std::int64_t numerator = n0 - n1 - n2 + n3 - 2 * swaps;
  const double denom = std::sqrt(static_cast<double>(n0 - n1)) *
                       std::sqrt(static_cast<double>(n0 - n2));
  // sqrt(k)^2 can land an ulp under k, nudging perfect (anti)correlation
  // past +-1; clamp restores the mathematical range.
  return {std::clamp(static_cast<double>(numerator) / denom, -1.0, 1.0), false};
}

}  // namespace ura
