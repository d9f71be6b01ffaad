#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sharedb {

/** Worker count: `requested` when positive, otherwise the hardware concurrency. */
inline std::size_t resolve_threads(std::size_t requested)
{
    if (requested) return requested;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/** Calls fn(worker, i) for i in [0, n), handing out indices dynamically.  The first exception is rethrown after all
 * workers stop. */
template<typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn &&fn)
{
    threads = std::min(resolve_threads(threads), std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&](std::size_t worker) {
        for (;;) {
            auto i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(worker, i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work, t);
        work(0);
    }
    if (error) std::rethrow_exception(error);
}

} // namespace sharedb
