#ifndef RICCI_PARALLEL_HPP
#define RICCI_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace ricci::detail {

/// Runs f(i) for i in [0, count) on up to `workers` threads. Tasks are pulled
/// from a shared counter; the lowest-index exception, if any, is rethrown.
template <class F>
void parallel_for(int count, int workers, F&& f) {
    if (count <= 0) return;
    std::vector<std::exception_ptr> errors(count);
    std::atomic<int> next{0};
    auto body = [&]() {
        for (int i = next++; i < count; i = next++) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::clamp(workers, 1, count);
    if (threads == 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int k = 0; k < threads; ++k) pool.emplace_back(body);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace ricci::detail

#endif
