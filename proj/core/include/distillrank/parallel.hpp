#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace distillrank {

/// Runs fn(i) for i in [0, n). With threads <= 1 the loop is serial; with
/// more, indices are claimed in strides so results never depend on the
/// thread count as long as fn writes only to slot i. The first exception is
/// rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    const std::size_t n_workers =
        threads <= 1 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    if (n_workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&](std::size_t worker_id) {
        try {
            for (std::size_t i = worker_id; i < n; i += n_workers) fn(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace distillrank
