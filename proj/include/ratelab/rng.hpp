#pragma once

#include <cstdint>
#include <random>

namespace ratelab {

// Deterministic variate source. std::mt19937_64's raw output sequence is
// fully specified by the standard, but std::uniform_real_distribution's draw
// pattern is not, so the mappings below are done by hand. Every stochastic
// routine in the library takes an explicit seed and derives per-replication
// seeds as base + index; two runs with the same seed produce identical
// streams on any conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform in [0,1) with 53-bit resolution
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // uniform integer in [0, n); n is small here (atom/cell counts), so the
    // multiply-high mapping's bias of O(n/2^64) is irrelevant
    std::uint64_t below(std::uint64_t n) {
        unsigned __int128 p = static_cast<unsigned __int128>(eng_()) * n;
        return static_cast<std::uint64_t>(p >> 64);
    }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

} // namespace ratelab
