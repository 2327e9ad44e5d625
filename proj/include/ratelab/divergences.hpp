#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ratelab/grid.hpp"

namespace ratelab {

// Divergences between two densities on the same grid. Conventions:
//   hellinger(f0,f)   symmetric, bounded by sqrt(2)
//   hstar(f0,f)       directional root-ratio-weighted variant; requires f > 0
//                     at every node (error names the first offending node)
//   kl / v            0*log(0/x) = 0; +infinity when f vanishes where f0 > 0
//   sup_ratio         max over nodes of f0/f, +infinity on a zero node of f
// The report computes all five in one pass over the nodes using the same
// per-node terms as the individual functions, so the two paths agree bit for
// bit.

namespace detail {

inline double hellinger_term(double a, double b) {
    double d = std::sqrt(a) - std::sqrt(b);
    return d * d;
}

// (sqrt(f0)-sqrt(f))^2 * ((2/3) sqrt(f0/f) + 1/3); caller guarantees b > 0
inline double hstar_term(double a, double b) {
    double sa = std::sqrt(a);
    double sb = std::sqrt(b);
    double d = sa - sb;
    return d * d * ((2.0 / 3.0) * (sa / sb) + 1.0 / 3.0);
}

inline bool kl_like_term(double a, double b, double& log_ratio) {
    // returns false when the contribution is 0 (a == 0), sets log_ratio
    // otherwise; a > 0 with b == 0 yields +infinity
    if (a == 0.0) return false;
    log_ratio = (b == 0.0) ? std::numeric_limits<double>::infinity()
                           : std::log(a / b);
    return true;
}

inline void check_pair(const GridDensity& f0, const GridDensity& f, const char* where) {
    if (!f0.grid || !f.grid)
        throw std::invalid_argument(std::string(where) + ": density without a grid");
    require_same_layout(*f0.grid, *f.grid, where);
}

} // namespace detail

inline double hellinger(const GridDensity& f0, const GridDensity& f) {
    detail::check_pair(f0, f, "hellinger");
    CompensatedSum acc;
    for (int i = 0; i < f0.grid->m; ++i)
        acc.add(detail::hellinger_term(f0.values[static_cast<std::size_t>(i)],
                                       f.values[static_cast<std::size_t>(i)]));
    return std::sqrt(std::max(0.0, acc.value() * f0.grid->weight));
}

inline double hstar(const GridDensity& f0, const GridDensity& f) {
    detail::check_pair(f0, f, "hstar");
    CompensatedSum acc;
    for (int i = 0; i < f0.grid->m; ++i) {
        double b = f.values[static_cast<std::size_t>(i)];
        if (b == 0.0)
            throw std::domain_error("hstar: second density is zero at node " +
                                    std::to_string(i) +
                                    "; the root-ratio weight is undefined there");
        acc.add(detail::hstar_term(f0.values[static_cast<std::size_t>(i)], b));
    }
    return std::sqrt(std::max(0.0, acc.value() * f0.grid->weight));
}

// Total variant of hstar for membership predicates: +infinity when f vanishes
// where f0 does not (the defining integral diverges), and nodes where both
// densities vanish contribute nothing instead of raising an error.
inline double hstar_extended(const GridDensity& f0, const GridDensity& f) {
    detail::check_pair(f0, f, "hstar_extended");
    CompensatedSum acc;
    for (int i = 0; i < f0.grid->m; ++i) {
        double a = f0.values[static_cast<std::size_t>(i)];
        double b = f.values[static_cast<std::size_t>(i)];
        if (b == 0.0) {
            if (a == 0.0) continue;
            return std::numeric_limits<double>::infinity();
        }
        acc.add(detail::hstar_term(a, b));
    }
    return std::sqrt(std::max(0.0, acc.value() * f0.grid->weight));
}

inline double kl(const GridDensity& f0, const GridDensity& f) {
    detail::check_pair(f0, f, "kl");
    CompensatedSum acc;
    for (int i = 0; i < f0.grid->m; ++i) {
        double a = f0.values[static_cast<std::size_t>(i)];
        double lr = 0.0;
        if (!detail::kl_like_term(a, f.values[static_cast<std::size_t>(i)], lr))
            continue;
        if (std::isinf(lr)) return std::numeric_limits<double>::infinity();
        acc.add(a * lr);
    }
    return acc.value() * f0.grid->weight;
}

inline double v_divergence(const GridDensity& f0, const GridDensity& f) {
    detail::check_pair(f0, f, "v_divergence");
    CompensatedSum acc;
    for (int i = 0; i < f0.grid->m; ++i) {
        double a = f0.values[static_cast<std::size_t>(i)];
        double lr = 0.0;
        if (!detail::kl_like_term(a, f.values[static_cast<std::size_t>(i)], lr))
            continue;
        if (std::isinf(lr)) return std::numeric_limits<double>::infinity();
        acc.add(a * lr * lr);
    }
    return acc.value() * f0.grid->weight;
}

inline double sup_ratio(const GridDensity& f0, const GridDensity& f) {
    detail::check_pair(f0, f, "sup_ratio");
    double best = 0.0;
    for (int i = 0; i < f0.grid->m; ++i) {
        double a = f0.values[static_cast<std::size_t>(i)];
        double b = f.values[static_cast<std::size_t>(i)];
        if (a == 0.0) continue;
        if (b == 0.0) return std::numeric_limits<double>::infinity();
        best = std::max(best, a / b);
    }
    return best;
}

struct DivergenceReport {
    double hellinger = 0.0;
    double hstar = 0.0;
    double kl = 0.0;
    double v = 0.0;
    double sup_ratio = 0.0;
    bool clamped = false; // either density was floored during normalization
};

inline DivergenceReport divergence_report(const GridDensity& f0, const GridDensity& f) {
    detail::check_pair(f0, f, "divergence_report");
    CompensatedSum h_acc, hs_acc, kl_acc, v_acc;
    double best_ratio = 0.0;
    for (int i = 0; i < f0.grid->m; ++i) {
        double a = f0.values[static_cast<std::size_t>(i)];
        double b = f.values[static_cast<std::size_t>(i)];
        if (b == 0.0)
            throw std::domain_error("divergence_report: second density is zero at node " +
                                    std::to_string(i) +
                                    "; the root-ratio weight is undefined there");
        h_acc.add(detail::hellinger_term(a, b));
        hs_acc.add(detail::hstar_term(a, b));
        double lr = 0.0;
        if (detail::kl_like_term(a, b, lr)) {
            kl_acc.add(a * lr);
            v_acc.add(a * lr * lr);
            best_ratio = std::max(best_ratio, a / b);
        }
    }
    DivergenceReport rep;
    double w = f0.grid->weight;
    rep.hellinger = std::sqrt(std::max(0.0, h_acc.value() * w));
    rep.hstar = std::sqrt(std::max(0.0, hs_acc.value() * w));
    rep.kl = kl_acc.value() * w;
    rep.v = v_acc.value() * w;
    rep.sup_ratio = best_ratio;
    rep.clamped = f0.clamped || f.clamped;
    return rep;
}

} // namespace ratelab
