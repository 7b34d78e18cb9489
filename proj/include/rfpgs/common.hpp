// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rfpgs {

/// Speed of light in vacuum [m/s].
inline constexpr double kSpeedOfLight = 299792458.0;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Inverse of sigmoid. Requires p in (0,1).
inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("logit: argument must be in (0,1)");
    return std::log(p / (1.0 - p));
}

/// Number of worker threads. Controlled by RFPGS_THREADS, defaults to the
/// hardware concurrency. Always at least 1.
inline int thread_count() {
    static const int n = [] {
        if (const char* env = std::getenv("RFPGS_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0)
                return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return n;
}

/// Runs fn(begin, end) over [0, n) split into contiguous static ranges, one
/// per worker. Static partitioning keeps per-range results reproducible for
/// a fixed worker count, and reductions over ranges in index order stay
/// within 1e-10 of each other across worker counts.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn, int workers = 0) {
    if (n <= 0)
        return;
    int t = workers > 0 ? workers : thread_count();
    if (t > n)
        t = static_cast<int>(n);
    if (t <= 1) {
        fn(std::int64_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(t) - 1);
    const std::int64_t chunk = (n + t - 1) / t;
    for (int i = 1; i < t; ++i) {
        const std::int64_t b = i * chunk;
        const std::int64_t e = std::min(n, b + chunk);
        if (b >= e)
            break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(std::int64_t{0}, std::min(n, chunk));
    for (auto& th : pool)
        th.join();
}

/// Deterministic RNG used everywhere randomness is needed. Seeding is
/// explicit; never seeded from the clock.
using Rng = std::mt19937_64;

/// Derives an independent stream from a base seed and a stream id.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    const std::uint64_t material[2] = {seed, stream ^ 0x9e3779b97f4a7c15ull};
    std::seed_seq seq(material, material + 2);
    return Rng(seq);
}

/// FNV-1a over raw bytes; used for cheap state fingerprints in tests and
/// determinism checks.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

template <typename T>
std::uint64_t fnv1a_vec(const std::vector<T>& v, std::uint64_t h = 1469598103934665603ull) {
    return v.empty() ? h : fnv1a(v.data(), v.size() * sizeof(T), h);
}

} // namespace rfpgs
