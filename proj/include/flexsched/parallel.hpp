#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace flexsched {

// Runs work(0..total-1) across up to `threads` workers. Callers must write
// results into pre-sized slots so the outcome is independent of scheduling.
inline void run_sharded(int total, int threads, const std::function<void(int)>& work) {
    if (threads <= 1 || total <= 1) {
        for (int i = 0; i < total; ++i) work(i);
        return;
    }
    int workers = std::min(threads, total);
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = next.fetch_add(1); i < total; i = next.fetch_add(1)) work(i);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace flexsched
