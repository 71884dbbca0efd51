//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_PARALLEL_H_
#define MOLRL_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace molrl {

// Worker count from MOLRL_THREADS, falling back to hardware concurrency.
int thread_count();

// Runs fn(i) for i in [0, n). Work items must write to disjoint outputs; any
// reduction is done by the caller in index order so results do not depend on
// the number of threads. The first exception thrown by a worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &fn);

}  // namespace molrl

#endif  // MOLRL_PARALLEL_H_
