// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nif {

namespace detail {
inline std::atomic<int> &thread_override() {
    static std::atomic<int> value{-1};
    return value;
}
}  // namespace detail

/// Overrides the worker count for this process. Negative restores the
/// NIF_THREADS / hardware default.
inline void set_thread_count(int n) { detail::thread_override().store(n); }

/// Worker count: explicit override, else NIF_THREADS (0 = all cores), else all cores.
inline int thread_count() {
    int hw = std::max(1u, std::thread::hardware_concurrency());
    int n = detail::thread_override().load();
    if (n < 0) {
        n = 0;
        if (const char *env = std::getenv("NIF_THREADS")) {
            try {
                n = std::stoi(env);
            } catch (...) {
                n = 0;
            }
        }
    }
    return n <= 0 ? hw : n;
}

/// Runs body(i) for i in [0, count) on up to thread_count() workers. Work is
/// handed out dynamically, so bodies must write only to slots they own.
template <typename Body>
void parallel_for(size_t count, Body &&body) {
    if (count == 0) return;
    size_t workers = std::min<size_t>(static_cast<size_t>(thread_count()), count);
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        try {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next.store(count);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto &t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace nif
