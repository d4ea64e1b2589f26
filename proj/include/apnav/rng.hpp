#pragma once

// Portable seeded random streams.
//
// std::uniform_real_distribution and friends are implementation-defined, so
// every draw here is derived directly from std::mt19937_64 output. That keeps
// datasets, models and reports byte-identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace apnav {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over the bytes of a string.
constexpr std::uint64_t hash_string(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Combines a parent seed with a child key into an independent seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key) noexcept
{
    return mix64(mix64(parent) ^ (key + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view key) noexcept
{
    return derive_seed(parent, hash_string(key));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = mag * std::sin(angle);
        has_spare_ = true;
        return mag * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace apnav
