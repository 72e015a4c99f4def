#include "repgeom/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace repgeom {

unsigned default_workers() {
    if (const char* env = std::getenv("REPGEOM_THREADS"); env != nullptr && *env != '\0') {
        try {
            const long v = std::stol(env);
            if (v >= 1) {
                return static_cast<unsigned>(v);
            }
        } catch (const std::exception&) {
            // fall through to hardware concurrency
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1U : hw;
}

unsigned resolve_workers(unsigned requested) {
    return requested == 0 ? default_workers() : requested;
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body) {
    if (n == 0) {
        return;
    }
    workers = resolve_workers(workers);
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    const std::size_t n_threads = std::min<std::size_t>(workers, n);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(n_threads - 1);
    for (std::size_t t = 1; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    pool.clear();  // joins

    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace repgeom
