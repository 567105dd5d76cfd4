#include "cott/threads.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace cott {

int thread_budget() {
    int budget = static_cast<int>(std::thread::hardware_concurrency());
    if (budget < 1) budget = 1;
    if (const char* env = std::getenv("COTT_THREADS")) {
        try {
            budget = std::min(budget, std::max(1, std::stoi(env)));
        } catch (const std::exception&) {
            // Unparseable values fall back to the hardware count.
        }
    }
    return budget;
}

void parallel_for(Index count, const std::function<void(Index)>& fn) {
    if (count <= 0) return;
    const Index workers = std::min<Index>(count, thread_budget());
    if (workers <= 1) {
        for (Index i = 0; i < count; ++i) fn(i);
        return;
    }
    // Fixed contiguous ranges per worker keep the assignment deterministic.
    const Index per = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
        const Index lo = w * per;
        const Index hi = std::min(count, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (Index i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace cott
