#ifndef CLSP_RNG_HPP
#define CLSP_RNG_HPP

#include <cstdint>

namespace clsp {

// SplitMix64 (Steele, Lea & Flood, 2014; public domain reference constants).
// The standard <random> distributions are implementation-defined, so every
// random draw in this project goes through this generator and the unbiased
// bounded sampler below. Identical seeds give identical streams on every
// platform and toolchain.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform integer in [lo, hi], both inclusive. Unbiased (rejection on the
    // 2^64 mod range residue).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1ull;
        if (range == 0) return static_cast<std::int64_t>(next()); // full 64-bit span
        const std::uint64_t reject_below = (0ull - range) % range;
        for (;;) {
            const std::uint64_t x = next();
            if (x >= reject_below) return lo + static_cast<std::int64_t>(x % range);
        }
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform_real() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo, hi).
    double uniform_real(double lo, double hi) {
        return lo + (hi - lo) * uniform_real();
    }

private:
    std::uint64_t state_;
};

// Stable per-index seed derivation. Indexes close together must not yield
// correlated streams, so the index is pushed through the SplitMix64 finalizer
// before combining with the base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    SplitMix64 mixer(index + 0x632BE59BD9B4E019ull);
    return base ^ mixer.next();
}

// 64-bit hash used for dataset split assignment; one SplitMix64 step.
inline std::uint64_t hash64(std::uint64_t x) {
    return SplitMix64(x).next();
}

} // namespace clsp

#endif
