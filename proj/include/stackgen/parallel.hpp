#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace stackgen {

// Worker count for an njobs setting: 0 runs sequentially, positive values
// are taken literally and negative values count back from the number of
// cores (-1 all, -2 all but one).
inline unsigned worker_count(int njobs) {
    if (njobs == 0) return 1;
    if (njobs > 0) return static_cast<unsigned>(njobs);
    const int cores = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return static_cast<unsigned>(std::max(1, cores + 1 + njobs));
}

// Runs body(i) for i in [0, count). Results must be written to slots owned
// by i so the outcome does not depend on scheduling. If several tasks throw,
// the exception of the lowest index is rethrown.
inline void parallel_for(std::size_t count, int njobs, const std::function<void(std::size_t)>& body) {
    const unsigned workers = std::min<std::size_t>(worker_count(njobs), std::max<std::size_t>(count, 1));
    std::vector<std::exception_ptr> errors(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<std::size_t> first_error{count};
        auto run = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || i > first_error.load()) return;
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                    std::size_t seen = first_error.load();
                    while (i < seen && !first_error.compare_exchange_weak(seen, i)) {
                    }
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace stackgen
