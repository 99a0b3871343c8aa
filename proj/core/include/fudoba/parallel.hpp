// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#pragma once

#include <cstddef>
#include <functional>

namespace fudoba {

/// Runs fn(0..n-1) on up to `threads` workers (0 or 1 means inline). Each
/// index runs exactly once; callers write results into per-index slots so
/// output never depends on scheduling. The lowest-index exception is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace fudoba
