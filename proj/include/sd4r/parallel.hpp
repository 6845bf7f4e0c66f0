// Copyright 2026 The SD4R Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace sd4r {

// Worker count used by parallel_for. 0 selects hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n) over a static contiguous partition. Callers must
// write results into disjoint, preallocated slots; with that discipline the
// output is bit-identical for every thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sd4r
