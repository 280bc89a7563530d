#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace clh {

/// Applies fn to every index in [0, count) with at most max_in_flight
/// workers. Results land at their input index, so the output order never
/// depends on scheduling. The lowest-index exception, if any, is rethrown
/// after all workers drain.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t count, std::size_t max_in_flight, Fn&& fn) {
    std::vector<Result> results(count);
    if (count == 0) return results;
    std::size_t workers = max_in_flight == 0 ? 1 : std::min(max_in_flight, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
        return results;
    }

    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                results[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return results;
}

} // namespace clh
