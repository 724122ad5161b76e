#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "wqed/errors.hpp"

namespace wqed {

/// Maximum worker count from WQED_THREADS; unset or 0 means hardware concurrency.
inline unsigned thread_count() {
    unsigned n = 0;
    if (const char* env = std::getenv("WQED_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 0) throw ValidationError("WQED_THREADS must be a non-negative integer");
        n = static_cast<unsigned>(v);
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

/// Calls f(i) for i in [0, n) on up to `threads` workers with a static
/// contiguous partition. Results must be written per index; the exception
/// from the lowest failing index is rethrown.
template <class F>
void parallel_for(std::size_t n, F&& f, unsigned threads = thread_count()) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = n * w / workers;
            const std::size_t end = n * (w + 1) / workers;
            pool.emplace_back([&, w, begin, end] {
                for (std::size_t i = begin; i < end; ++i) {
                    try {
                        f(i);
                    } catch (...) {
                        errors[w] = std::current_exception();
                        return;
                    }
                }
            });
        }
    }
    for (std::size_t w = 0; w < workers; ++w)
        if (errors[w]) std::rethrow_exception(errors[w]);
}

}  // namespace wqed
