// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/threading.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace cdi3d {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_buckets(int n_items, int n_buckets, int n_threads,
                      const std::function<void(int, int, int)>& fn) {
  if (n_items <= 0) return;
  n_buckets = std::clamp(n_buckets, 1, n_items);
  n_threads = std::clamp(n_threads, 1, n_buckets);

  auto range = [&](int bucket) {
    const int begin = static_cast<int>(static_cast<long>(n_items) * bucket / n_buckets);
    const int end = static_cast<int>(static_cast<long>(n_items) * (bucket + 1) / n_buckets);
    return std::pair<int, int>(begin, end);
  };

  if (n_threads == 1) {
    for (int b = 0; b < n_buckets; ++b) {
      auto [begin, end] = range(b);
      fn(b, begin, end);
    }
    return;
  }

  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      for (int b = t; b < n_buckets; b += n_threads) {
        auto [begin, end] = range(b);
        fn(b, begin, end);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace cdi3d
