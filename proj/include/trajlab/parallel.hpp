#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace trajlab {

/**
 * Evaluates fn(0..n-1) into a vector, optionally across a small worker pool.
 * Each index writes only its own slot, so the result is independent of the
 * worker count, and reductions over the returned vector in index order stay
 * deterministic. The first exception thrown by fn wins and is rethrown after
 * all workers drain.
 */
template <class R>
std::vector<R> parallel_map(std::int64_t n, int jobs, const std::function<R(std::int64_t)>& fn) {
    std::vector<R> out(static_cast<std::size_t>(n));
    if (jobs <= 1 || n < 2) {
        for (std::int64_t i = 0; i < n; ++i) out[std::size_t(i)] = fn(i);
        return out;
    }
    const int workers = int(std::min<std::int64_t>(jobs, n));
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> bail{false};
    std::exception_ptr first_error;
    std::mutex error_lock;
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::int64_t i = next.fetch_add(1); i < n && !bail.load(); i = next.fetch_add(1)) {
                try {
                    out[std::size_t(i)] = fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> hold(error_lock);
                    if (!first_error) first_error = std::current_exception();
                    bail.store(true);
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

}  // namespace trajlab
