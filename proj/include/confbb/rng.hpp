#pragma once

// Seeded random streams. Every stochastic operation takes an explicit generator;
// parallel work derives one generator per index so results do not depend on
// scheduling or thread count.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include "confbb/errors.hpp"

namespace confbb {

using Rng = std::mt19937_64;

namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `index` under `base`. Distinct indices give
/// statistically independent mt19937_64 streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// FNV-1a over a label, for naming sub-streams ("train", "val", ...).
inline std::uint64_t label_hash(std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    return derive_seed(base, label_hash(label));
}

inline Rng make(std::uint64_t base, std::uint64_t index) { return Rng(derive_seed(base, index)); }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

/// Uniform on (0, 1].
inline double uniform01_open_low(Rng& g) { return 1.0 - uniform01(g); }

/// Standard normal by Box-Muller (one variate per call).
inline double standard_normal(Rng& g) {
    const double u1 = uniform01_open_low(g);
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Gamma(shape, 1) by Marsaglia-Tsang. For shape < 1 draws Gamma(shape + 1)
/// and multiplies by U^(1/shape).
inline double gamma(double shape, Rng& g) {
    detail::require(shape > 0.0 && std::isfinite(shape), "gamma shape must be positive and finite");
    if (shape < 1.0) {
        const double x = gamma(shape + 1.0, g);
        const double u = uniform01_open_low(g);
        return x * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double z, v;
        do {
            z = standard_normal(g);
            v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01_open_low(g);
        if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
        if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
    }
}

inline bool bernoulli(double p_one, Rng& g) { return uniform01(g) < p_one; }

}  // namespace rng
}  // namespace confbb
