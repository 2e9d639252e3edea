#pragma once

// Deterministic random numbers.
//
// CounterRng is SplitMix64 (Steele, Lea, Flood 2014): output k is
// mix(key + (k + 1) * 0x9E3779B97F4A7C15) where mix is the standard
// SplitMix64 finalizer. The stream is a pure function of (key, k), so the
// same seed yields the same sequence on every platform.
//
// Sub-seeds are derived by hashing a label with 64-bit FNV-1a and mixing it
// into the parent seed: derive_seed(seed, label) = mix(seed ^ mix(fnv1a(label))).
//
// Floating point draws:
//   uniform()  = (u64 >> 11) * 2^-53, in [0, 1)
//   normal()   = Box-Muller on two uniforms, cosine branch only

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace trajgad {

using Seed = std::uint64_t;

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace detail

constexpr Seed derive_seed(Seed seed, std::string_view label) noexcept {
    return detail::splitmix_mix(seed ^ detail::splitmix_mix(detail::fnv1a(label)));
}

constexpr Seed derive_seed(Seed seed, std::uint64_t index) noexcept {
    return detail::splitmix_mix(seed ^ detail::splitmix_mix(index + detail::kGolden));
}

class CounterRng {
public:
    explicit constexpr CounterRng(Seed key) noexcept : key_(key) {}

    constexpr std::uint64_t next_u64() noexcept {
        ++counter_;
        return detail::splitmix_mix(key_ + counter_ * detail::kGolden);
    }

    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept {
        // 1 - u keeps the log argument in (0, 1].
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

    // Unbiased integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    [[nodiscard]] constexpr std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace trajgad
