// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

namespace cdi3d {

// Resolves a --threads request; 0 means "use hardware concurrency".
int resolve_threads(int requested);

// Splits [0, n_items) into n_buckets contiguous ranges and runs fn(bucket,
// begin, end) for each, distributing buckets over threads. The bucket count
// is independent of the thread count, so callers that reduce per-bucket
// results in bucket order get output that does not depend on --threads.
void parallel_buckets(int n_items, int n_buckets, int n_threads,
                      const std::function<void(int, int, int)>& fn);

}  // namespace cdi3d
