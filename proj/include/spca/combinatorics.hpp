#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace spca {

/// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  constexpr auto cap = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t result = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i is exact at every step; guard the multiply.
    const auto factor = static_cast<std::uint64_t>(n - k + i);
    if (result > cap / factor) return cap;
    result = result * factor / static_cast<std::uint64_t>(i);
  }
  return result;
}

/// Number of supports with 1 <= |J| <= max_size, saturating.
inline std::uint64_t support_count_upto(std::int64_t p, std::int64_t max_size) {
  constexpr auto cap = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 0;
  for (std::int64_t k = 1; k <= max_size; ++k) {
    const auto c = binomial(p, k);
    if (c > cap - total) return cap;
    total += c;
  }
  return total;
}

/// Calls f(span of k sorted indices) for every k-subset of {0..p-1}, in lexicographic order.
template <class F>
void for_each_combination(Eigen::Index p, Eigen::Index k, F&& f) {
  if (k < 1 || k > p) return;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  while (true) {
    f(std::span<const Eigen::Index>(idx));
    Eigen::Index i = k - 1;
    while (i >= 0 && idx[i] == p - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (Eigen::Index j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace spca
