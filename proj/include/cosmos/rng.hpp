#pragma once

#include <cstdint>
#include <random>

namespace cosmos {

// Seeded generator with self-contained derivation of bounded draws.
// mt19937_64 output is pinned by the standard, and the helpers below avoid
// std::uniform_*_distribution (whose mapping is implementation-defined), so
// a given seed yields the same stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, n). n must be > 0.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

    // Uniform in [lo, hi] inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // Uniform in [0, 1) with 53 random bits.
    double real01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool chance(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return real01() < p;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cosmos
