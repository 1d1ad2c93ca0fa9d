#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace chaospde {

// Tripped when a run would exceed a configured resource limit or produces
// non-finite values; the CLI maps this to exit code 3.
class GuardError : public std::runtime_error {
public:
    explicit GuardError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

enum class LogLevel { Off = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("CHAOS_SPDE_LOG");
        if (!env) return LogLevel::Off;
        if (std::strcmp(env, "info") == 0) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Off;
    }();
    return level;
}

inline void log_at(LogLevel lvl, const char* fmt, ...) {
    if (log_level() < lvl) return;
    std::va_list args;
    va_start(args, fmt);
    std::fprintf(stderr, lvl == LogLevel::Debug ? "[debug] " : "[info] ");
    std::vfprintf(stderr, fmt, args);
    std::fprintf(stderr, "\n");
    va_end(args);
}

#define CHAOSPDE_LOG_INFO(...) ::chaospde::log_at(::chaospde::LogLevel::Info, __VA_ARGS__)
#define CHAOSPDE_LOG_DEBUG(...) ::chaospde::log_at(::chaospde::LogLevel::Debug, __VA_ARGS__)

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Work is split into fixed index ranges, so any
// routine whose tasks write to disjoint slots produces output independent of
// the thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    int nt = resolve_threads(threads);
    if (nt <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t chunk = (n + static_cast<std::size_t>(nt) - 1) / static_cast<std::size_t>(nt);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        std::size_t lo = static_cast<std::size_t>(t) * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Deterministic blocked reduction: per-block partial sums are accumulated
// sequentially inside each fixed-size block, blocks are combined in index
// order. Bit-identical for any thread count.
template <typename Fn>
double parallel_block_sum(std::size_t n, std::size_t block_size, int threads, Fn&& term) {
    if (block_size == 0) block_size = 1;
    std::size_t nblocks = (n + block_size - 1) / block_size;
    std::vector<double> partial(nblocks, 0.0);
    parallel_for(nblocks, threads, [&](std::size_t b) {
        std::size_t lo = b * block_size;
        std::size_t hi = std::min(n, lo + block_size);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += term(i);
        partial[b] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

inline std::uint64_t binomial_checked(std::uint64_t n, std::uint64_t k, bool& overflow) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // result * (n-k+i) is divisible by i at this point
        std::uint64_t num = n - k + i;
        if (result > UINT64_MAX / num) {
            overflow = true;
            return UINT64_MAX;
        }
        result = result * num / i;
    }
    return result;
}

}  // namespace chaospde
