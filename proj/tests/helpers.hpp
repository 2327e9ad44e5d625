#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "ratelab/ratelab.hpp"

namespace testutil {

using namespace ratelab;

// iid-uniform values in [lo,hi], normalized; rough but strictly positive
inline GridDensity random_positive_density(const GridPtr& grid, Rng& rng, double lo = 0.05,
                                           double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(grid->m));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return normalize(v, grid, 0.0);
}

// exp of a few random harmonics: smooth and strictly positive
inline GridDensity random_smooth_density(const GridPtr& grid, Rng& rng, int harmonics = 3,
                                         double amp = 0.8) {
    std::vector<double> a(static_cast<std::size_t>(harmonics));
    std::vector<double> b(static_cast<std::size_t>(harmonics));
    for (int h = 0; h < harmonics; ++h) {
        a[static_cast<std::size_t>(h)] = rng.uniform(-amp, amp);
        b[static_cast<std::size_t>(h)] = rng.uniform(-amp, amp);
    }
    std::vector<double> v(static_cast<std::size_t>(grid->m));
    for (int i = 0; i < grid->m; ++i) {
        double x = grid->nodes[static_cast<std::size_t>(i)];
        double s = 0.0;
        for (int h = 0; h < harmonics; ++h)
            s += a[static_cast<std::size_t>(h)] * std::cos(2.0 * std::numbers::pi * (h + 1) * x) +
                 b[static_cast<std::size_t>(h)] * std::sin(2.0 * std::numbers::pi * (h + 1) * x);
        v[static_cast<std::size_t>(i)] = std::exp(s);
    }
    return normalize(v, grid, 0.0);
}

// Two-piece mixtures with closed-form Hellinger distances. half_mix(grid, a)
// puts density 2(1-a) on [0,1/2) and 2a on [1/2,1); for two mixing weights
// the quadrature is exact (piecewise constant), so
//   H(half_mix(a), half_mix(b))^2 = (sqrt(1-a)-sqrt(1-b))^2 + (sqrt(a)-sqrt(b))^2
// holds to machine precision. Needs even m.
inline GridDensity half_mix(const GridPtr& grid, double a) {
    std::vector<double> v(static_cast<std::size_t>(grid->m));
    for (int i = 0; i < grid->m; ++i)
        v[static_cast<std::size_t>(i)] = 2 * i < grid->m ? 2.0 * (1.0 - a) : 2.0 * a;
    return normalize(v, grid, 0.0);
}

inline double half_mix_hellinger(double a, double b) {
    double u = std::sqrt(1.0 - a) - std::sqrt(1.0 - b);
    double w = std::sqrt(a) - std::sqrt(b);
    return std::sqrt(u * u + w * w);
}

// mixing weight at a prescribed Hellinger distance from half_mix(0)
inline double half_mix_weight_for(double h) {
    double s = 1.0 - h * h / 2.0;
    return 1.0 - s * s;
}

} // namespace testutil
