#pragma once

#include <cstddef>
#include <new>
#include <vector>

namespace cott::memory {

/// Process-wide accounting of auxiliary workspace allocations.
///
/// Operations route their temporary buffers through TrackedAllocator, so
/// current_bytes()/peak_bytes() report exactly the auxiliary memory an
/// algorithm holds, excluding caller-owned input and output tensors (those
/// use the default allocator). Accounting is deterministic: the same call
/// sequence yields the same peak.
std::size_t current_bytes();
std::size_t peak_bytes();

/// Resets the tracked peak to the current level. Call before an operation
/// to measure that operation's peak in isolation.
void reset_peak();

void record_alloc(std::size_t bytes);
void record_free(std::size_t bytes);

template <typename T>
struct TrackedAllocator {
    using value_type = T;

    TrackedAllocator() noexcept = default;
    template <typename U>
    TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        record_alloc(n * sizeof(T));
        return static_cast<T*>(::operator new(n * sizeof(T)));
    }

    void deallocate(T* p, std::size_t n) noexcept {
        record_free(n * sizeof(T));
        ::operator delete(p);
    }

    template <typename U>
    bool operator==(const TrackedAllocator<U>&) const noexcept {
        return true;
    }
};

/// Workspace buffer whose bytes show up in the tracker.
template <typename T>
using TrackedVector = std::vector<T, TrackedAllocator<T>>;

}  // namespace cott::memory
