#pragma once

// Exception-safe OpenMP loops. An exception must not leave a parallel
// region, so each index catches its own and the one from the smallest
// index is rethrown afterwards; serial and parallel runs fail alike.

#include "datamarket/model.hpp"

#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>

namespace datamarket::detail {

class FirstError {
public:
    /// Call from a catch block.
    void record(std::uint64_t index) noexcept
    {
        const std::lock_guard lock(mutex_);
        if (index < index_) {
            index_ = index;
            error_ = std::current_exception();
        }
    }

    void rethrow_if_any() const
    {
        if (error_)
            std::rethrow_exception(error_);
    }

private:
    std::mutex mutex_;
    std::uint64_t index_ = std::numeric_limits<std::uint64_t>::max();
    std::exception_ptr error_;
};

/// Runs body(k) for k in [0, count), under OpenMP when exec is parallel.
template <typename F>
void for_each_index(std::uint64_t count, Execution exec, F&& body)
{
    if (exec == Execution::serial) {
        for (std::uint64_t k = 0; k < count; ++k)
            body(k);
        return;
    }
    FirstError error;
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(count); ++k) {
        try {
            body(static_cast<std::uint64_t>(k));
        } catch (...) {
            error.record(static_cast<std::uint64_t>(k));
        }
    }
    error.rethrow_if_any();
}

} // namespace datamarket::detail
