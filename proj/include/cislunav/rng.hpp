#pragma once

#include <cstdint>
#include <random>

namespace cislunav {

/// Deterministic uniform generator. mt19937_64 output is fixed by the
/// standard and the [0,1) mapping avoids std::uniform_real_distribution,
/// whose stream is implementation defined; sequences replay bit-exactly
/// for a given seed on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform in [-bound, bound).
    double symmetric(double bound) { return uniform(-bound, bound); }

    std::uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

/// Stable per-job seed derivation (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace cislunav
