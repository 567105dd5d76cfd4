#pragma once

#include <functional>

#include "cott/tensor.hpp"

namespace cott {

/// Worker-thread budget: hardware concurrency, capped by the COTT_THREADS
/// environment variable when set (minimum 1).
int thread_budget();

/// Runs fn(i) for i in [0, count) on up to thread_budget() threads.
/// Items are assigned to fixed contiguous ranges, so any run with
/// independent items produces identical results regardless of the budget.
void parallel_for(Index count, const std::function<void(Index)>& fn);

}  // namespace cott
