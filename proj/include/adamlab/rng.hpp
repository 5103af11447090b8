#pragma once

#include <cstdint>
#include <random>

#include "adamlab/vec.hpp"

namespace adamlab {

// Deterministic RNG wrapper. The distributions are hand-rolled on top of
// mt19937_64 because std::*_distribution output is implementation-defined,
// which would break the byte-identical-output contract across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second value is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, bound).
    std::uint64_t integer(std::uint64_t bound) {
        return eng_() % bound;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[integer(i)]);
        }
    }

private:
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

inline Vec random_normal_vec(int dim, Rng& rng, double scale = 1.0) {
    Vec v(static_cast<std::size_t>(dim));
    for (double& x : v) x = scale * rng.normal();
    return v;
}

// Stable seed mix for derived streams (epoch shuffles etc.).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed ^ (salt + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

} // namespace adamlab
