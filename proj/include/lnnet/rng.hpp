#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lnnet {

// Deterministic counter-based generator. Output k (counting from 1) of a
// given (seed, stream) is
//
//     mix64(state0 + k * 0x9e3779b97f4b7c15),   state0 = seed ^ mix64(stream)
//
// where mix64 is the SplitMix64 finalizer. Stream 0 therefore reproduces the
// canonical SplitMix64 sequence for `seed`, and every (seed, stream, k)
// triple yields the same value on any platform with 64-bit wraparound
// arithmetic.
class counter_rng {
public:
    static constexpr std::uint64_t gamma = 0x9e3779b97f4b7c15ULL;

    static constexpr std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    explicit counter_rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state0_(seed ^ mix64(stream)) {}

    std::uint64_t next_u64() { return mix64(state0_ + ++counter_ * gamma); }

    // Uniform in [0, 1) from the top 53 bits.
    double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the sine mate is cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53; // (0, 1], keeps log finite
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform in [0, n); modulo bias is below 2^-57 for the small n used here.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state0_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace lnnet
