#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fosr/parallel.hpp"
#include "fosr/rng.hpp"

namespace fosr::cv {

// Subject-level fold assignment: seeded shuffle, then round-robin so fold
// sizes differ by at most one.
inline std::vector<int> assign_folds(int n, int folds, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto g = rng::stream(seed, 0xf01d5);
  for (int i = n - 1; i > 0; --i) {
    const int j = rng::uniform_int(g, 0, i);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % folds;
  return fold_of;
}

}  // namespace fosr::cv
