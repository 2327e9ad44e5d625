#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratelab/divergences.hpp"
#include "ratelab/grid.hpp"
#include "ratelab/rng.hpp"

namespace ratelab {

// ---------- Bernstein polynomial mixtures ----------

// b(x; k, w) = sum_j w_j * beta(x; j, k-j+1), weights on the k-simplex.
struct BernsteinSpec {
    int k = 0;
    std::vector<double> weights;
};

inline void validate(const BernsteinSpec& spec) {
    if (spec.k < 1)
        throw std::invalid_argument("BernsteinSpec: order must be >= 1, got " +
                                    std::to_string(spec.k));
    if (static_cast<int>(spec.weights.size()) != spec.k)
        throw std::invalid_argument("BernsteinSpec: expected " + std::to_string(spec.k) +
                                    " weights, got " + std::to_string(spec.weights.size()));
    CompensatedSum s;
    for (std::size_t j = 0; j < spec.weights.size(); ++j) {
        double w = spec.weights[j];
        if (!std::isfinite(w) || w < 0.0)
            throw std::invalid_argument("BernsteinSpec: weight " + std::to_string(j) +
                                        " must be finite and nonnegative");
        s.add(w);
    }
    if (std::abs(s.value() - 1.0) > 1e-9)
        throw std::invalid_argument("BernsteinSpec: weights sum to " +
                                    std::to_string(s.value()) + ", need 1 within 1e-9");
}

// Mixture value at a single point of (0,1); beta component densities are
// evaluated through lgamma so large orders stay stable.
inline double bernstein_value(const BernsteinSpec& spec, double x) {
    validate(spec);
    if (!(x > 0.0) || !(x < 1.0))
        throw std::domain_error("bernstein_value: x must lie strictly inside (0,1)");
    double lx = std::log(x);
    double l1x = std::log1p(-x);
    double lg_k1 = std::lgamma(static_cast<double>(spec.k) + 1.0);
    CompensatedSum acc;
    for (int j = 1; j <= spec.k; ++j) {
        double w = spec.weights[static_cast<std::size_t>(j - 1)];
        if (w == 0.0) continue;
        double lc = lg_k1 - std::lgamma(static_cast<double>(j)) -
                    std::lgamma(static_cast<double>(spec.k - j + 1));
        acc.add(w * std::exp(lc + (j - 1) * lx + (spec.k - j) * l1x));
    }
    return acc.value();
}

inline GridDensity bernstein_density(const BernsteinSpec& spec, const GridPtr& grid,
                                     double floor = 0.0) {
    if (!grid) throw std::invalid_argument("bernstein_density: null grid");
    validate(spec);
    std::vector<double> values(static_cast<std::size_t>(grid->m));
    for (int i = 0; i < grid->m; ++i)
        values[static_cast<std::size_t>(i)] =
            bernstein_value(spec, grid->nodes[static_cast<std::size_t>(i)]);
    return normalize(std::move(values), grid, floor);
}

// ---------- spline exponential families ----------

// f_theta = exp(sum_j theta_j B_j(x) - c(theta)) with sum theta_j = 0 and
// |theta_j| <= M. Uniform knots; order q = 1 uses the K cell indicators,
// q = 2 the K+1 hat functions, so the basis count is q + K - 1 either way.
struct SplineExpSpec {
    int q = 1;
    int K = 1;
    std::vector<double> theta;
    double M = 10.0;
};

inline int spline_basis_count(const SplineExpSpec& spec) { return spec.q + spec.K - 1; }

inline void validate(const SplineExpSpec& spec) {
    if (spec.q != 1 && spec.q != 2)
        throw std::invalid_argument("SplineExpSpec: order q must be 1 or 2, got " +
                                    std::to_string(spec.q));
    if (spec.K < 1)
        throw std::invalid_argument("SplineExpSpec: need at least one knot cell");
    if (!(spec.M > 0.0) || !std::isfinite(spec.M))
        throw std::invalid_argument("SplineExpSpec: coefficient bound M must be positive");
    int J = spline_basis_count(spec);
    if (static_cast<int>(spec.theta.size()) != J)
        throw std::invalid_argument("SplineExpSpec: expected " + std::to_string(J) +
                                    " coefficients, got " + std::to_string(spec.theta.size()));
    CompensatedSum s;
    for (std::size_t j = 0; j < spec.theta.size(); ++j) {
        double t = spec.theta[j];
        if (!std::isfinite(t) || std::abs(t) > spec.M)
            throw std::invalid_argument("SplineExpSpec: coefficient " + std::to_string(j) +
                                        " violates |theta| <= " + std::to_string(spec.M));
        s.add(t);
    }
    if (std::abs(s.value()) > 1e-12)
        throw std::invalid_argument("SplineExpSpec: coefficients sum to " +
                                    std::to_string(s.value()) + ", need 0 within 1e-12");
}

// log f before normalization, i.e. sum_j theta_j B_j(x)
inline double spline_log_unnormalized(const SplineExpSpec& spec, double x) {
    double t = x * spec.K;
    if (spec.q == 1) {
        int cell = std::min(static_cast<int>(t), spec.K - 1);
        return spec.theta[static_cast<std::size_t>(cell)];
    }
    // q == 2: hats centered at knots i/K; at most two overlap any x
    int i = std::min(static_cast<int>(t), spec.K - 1);
    double frac = t - i;
    return spec.theta[static_cast<std::size_t>(i)] * (1.0 - frac) +
           spec.theta[static_cast<std::size_t>(i + 1)] * frac;
}

inline double spline_log_normalizer(const SplineExpSpec& spec, const GridPtr& grid) {
    validate(spec);
    return std::log(integrate(*grid, [&](double x) {
        return std::exp(spline_log_unnormalized(spec, x));
    }));
}

inline GridDensity spline_exp_density(const SplineExpSpec& spec, const GridPtr& grid,
                                      double floor = 0.0) {
    if (!grid) throw std::invalid_argument("spline_exp_density: null grid");
    validate(spec);
    std::vector<double> values(static_cast<std::size_t>(grid->m));
    for (int i = 0; i < grid->m; ++i)
        values[static_cast<std::size_t>(i)] =
            std::exp(spline_log_unnormalized(spec, grid->nodes[static_cast<std::size_t>(i)]));
    return normalize(std::move(values), grid, floor);
}

// Projects coefficients onto the zero-sum constraint by subtracting the mean.
inline std::vector<double> project_zero_sum(std::vector<double> theta) {
    CompensatedSum s;
    for (double t : theta) s.add(t);
    double mean = theta.empty() ? 0.0 : s.value() / static_cast<double>(theta.size());
    for (double& t : theta) t -= mean;
    return theta;
}

// ---------- smooth finite-dimensional families ----------

// Bounded feature maps on [0,1]; the family is f_theta ~ exp(theta . g(x)),
// normalized on the grid, with theta confined to a compact box.
struct Feature {
    enum class Kind { centered_monomial, cosine, sine };
    Kind kind = Kind::centered_monomial;
    int order = 1; // monomial degree or harmonic frequency

    double eval(double x) const {
        switch (kind) {
        case Kind::centered_monomial:
            return std::pow(x, order) - 1.0 / (order + 1.0);
        case Kind::cosine:
            return std::cos(2.0 * std::numbers::pi * order * x);
        case Kind::sine:
            return std::sin(2.0 * std::numbers::pi * order * x);
        }
        return 0.0;
    }
};

struct SmoothFamilySpec {
    std::vector<Feature> features;
    std::vector<std::array<double, 2>> box; // per-dimension [lo, hi]
    double beta = 1.0;                      // metric-equivalence exponent

    int d() const { return static_cast<int>(features.size()); }
};

inline void validate(const SmoothFamilySpec& spec) {
    if (spec.features.empty())
        throw std::invalid_argument("SmoothFamilySpec: need at least one feature");
    if (spec.box.size() != spec.features.size())
        throw std::invalid_argument("SmoothFamilySpec: box has " +
                                    std::to_string(spec.box.size()) + " intervals for " +
                                    std::to_string(spec.features.size()) + " features");
    for (const auto& f : spec.features)
        if (f.order < 1)
            throw std::invalid_argument("SmoothFamilySpec: feature order must be >= 1");
    for (std::size_t p = 0; p < spec.box.size(); ++p) {
        if (!std::isfinite(spec.box[p][0]) || !std::isfinite(spec.box[p][1]) ||
            !(spec.box[p][0] < spec.box[p][1]))
            throw std::invalid_argument("SmoothFamilySpec: box interval " + std::to_string(p) +
                                        " must have lo < hi, both finite");
    }
    if (!(spec.beta > 0.0) || spec.beta > 1.0)
        throw std::invalid_argument("SmoothFamilySpec: exponent beta must lie in (0,1]");
}

inline GridDensity smooth_family_density(const SmoothFamilySpec& spec,
                                         const std::vector<double>& theta,
                                         const GridPtr& grid, double floor = 0.0) {
    if (!grid) throw std::invalid_argument("smooth_family_density: null grid");
    validate(spec);
    if (theta.size() != spec.features.size())
        throw std::invalid_argument("smooth_family_density: expected " +
                                    std::to_string(spec.features.size()) +
                                    " parameters, got " + std::to_string(theta.size()));
    for (std::size_t p = 0; p < theta.size(); ++p)
        if (!std::isfinite(theta[p]) || theta[p] < spec.box[p][0] || theta[p] > spec.box[p][1])
            throw std::domain_error("smooth_family_density: parameter " + std::to_string(p) +
                                    " lies outside the box");
    std::vector<double> values(static_cast<std::size_t>(grid->m));
    for (int i = 0; i < grid->m; ++i) {
        double x = grid->nodes[static_cast<std::size_t>(i)];
        double e = 0.0;
        for (std::size_t p = 0; p < theta.size(); ++p)
            e += theta[p] * spec.features[p].eval(x);
        values[static_cast<std::size_t>(i)] = std::exp(e);
    }
    return normalize(std::move(values), grid, floor);
}

// Empirical constants a1 <= a2 with a1*|dtheta|^beta <= H <= sqrt(3)*Hstar
// <= a2*|dtheta|^beta over sampled parameter pairs. A family whose centered
// features are linearly dependent has H identically zero along a direction;
// that is detected deterministically through the feature Gram matrix (a
// sampled minimum would only approach zero) and reported as an error, as is
// an empirical a1 below 1e-9.
struct MetricEquivalence {
    double a1 = 0.0;
    double a2 = 0.0;
};

namespace detail {

inline bool gram_positive_definite(std::vector<std::vector<double>> g, double tol) {
    // in-place Cholesky; a pivot at or below tol means rank deficiency
    std::size_t d = g.size();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t k = 0; k < i; ++k)
            for (std::size_t j = i; j < d; ++j)
                g[j][i] -= g[j][k] * g[i][k];
        if (g[i][i] <= tol) return false;
        double r = std::sqrt(g[i][i]);
        for (std::size_t j = i; j < d; ++j) g[j][i] /= r;
    }
    return true;
}

} // namespace detail

inline MetricEquivalence measure_metric_equivalence(const SmoothFamilySpec& spec,
                                                    const GridPtr& grid, int samples,
                                                    std::uint64_t seed = 0x6d6574726963ULL) {
    if (!grid) throw std::invalid_argument("measure_metric_equivalence: null grid");
    validate(spec);
    if (samples < 100)
        throw std::invalid_argument("measure_metric_equivalence: need at least 100 "
                                    "sampled pairs, got " + std::to_string(samples));

    std::size_t d = spec.features.size();
    std::vector<std::vector<double>> feat(d, std::vector<double>(static_cast<std::size_t>(grid->m)));
    std::vector<std::vector<double>> gram(d, std::vector<double>(d, 0.0));
    for (std::size_t p = 0; p < d; ++p) {
        for (int i = 0; i < grid->m; ++i)
            feat[p][static_cast<std::size_t>(i)] =
                spec.features[p].eval(grid->nodes[static_cast<std::size_t>(i)]);
        double mean = integrate(*grid, feat[p]);
        for (double& v : feat[p]) v -= mean;
    }
    double scale = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
        for (std::size_t q = 0; q <= p; ++q) {
            CompensatedSum s;
            for (int i = 0; i < grid->m; ++i)
                s.add(feat[p][static_cast<std::size_t>(i)] * feat[q][static_cast<std::size_t>(i)]);
            gram[p][q] = gram[q][p] = s.value() * grid->weight;
        }
        scale = std::max(scale, gram[p][p]);
    }
    if (!detail::gram_positive_definite(gram, 1e-9 * std::max(scale, 1e-30)))
        throw std::domain_error("measure_metric_equivalence: degenerate family, the "
                                "centered features are linearly dependent");

    Rng rng(seed);
    auto draw = [&](std::vector<double>& theta) {
        theta.resize(d);
        for (std::size_t p = 0; p < d; ++p)
            theta[p] = rng.uniform(spec.box[p][0], spec.box[p][1]);
    };
    MetricEquivalence out;
    out.a1 = std::numeric_limits<double>::infinity();
    out.a2 = 0.0;
    std::vector<double> ta, tb;
    int used = 0;
    while (used < samples) {
        draw(ta);
        draw(tb);
        double dist = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            double diff = ta[p] - tb[p];
            dist += diff * diff;
        }
        dist = std::sqrt(dist);
        if (dist < 1e-12) continue;
        ++used;
        GridDensity fa = smooth_family_density(spec, ta, grid);
        GridDensity fb = smooth_family_density(spec, tb, grid);
        double denom = std::pow(dist, spec.beta);
        double h = hellinger(fa, fb);
        double hs = std::sqrt(3.0) * std::max(hstar(fa, fb), hstar(fb, fa));
        out.a1 = std::min(out.a1, h / denom);
        out.a2 = std::max(out.a2, hs / denom);
    }
    if (out.a1 <= 1e-9)
        throw std::domain_error("measure_metric_equivalence: degenerate family, "
                                "empirical lower constant is zero within 1e-9");
    return out;
}

// ---------- sup-ball lift ----------

// Lifts raw nonnegative sup-cover centers g_j into densities
// f_j = (sqrt(g_j) + eps)^2 / integral; every density f whose root stays
// within eps of sqrt(g_j) at all nodes then satisfies hstar(f, f_j) <= 8 eps.
// The construction requires eps <= 1.
inline std::vector<GridDensity> lift_sup_cover(const std::vector<std::vector<double>>& gs,
                                               const GridPtr& grid, double eps) {
    if (!grid) throw std::invalid_argument("lift_sup_cover: null grid");
    if (gs.empty())
        throw std::invalid_argument("lift_sup_cover: empty center list");
    if (!(eps > 0.0) || eps > 1.0)
        throw std::invalid_argument("lift_sup_cover: eps must lie in (0,1], got " +
                                    std::to_string(eps));
    std::vector<GridDensity> out;
    out.reserve(gs.size());
    for (std::size_t j = 0; j < gs.size(); ++j) {
        const auto& g = gs[j];
        if (static_cast<int>(g.size()) != grid->m)
            throw std::invalid_argument("lift_sup_cover: center " + std::to_string(j) +
                                        " has " + std::to_string(g.size()) +
                                        " values for a " + std::to_string(grid->m) +
                                        "-cell grid");
        std::vector<double> values(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            double v = g[i];
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("lift_sup_cover: center " + std::to_string(j) +
                                            " has a negative or non-finite value at node " +
                                            std::to_string(i));
            double r = std::sqrt(v) + eps;
            values[i] = r * r;
        }
        out.push_back(normalize(std::move(values), grid, 0.0));
    }
    return out;
}

// ---------- cover to partition ----------

// Disjointification recipe: P_1 = O_1, P_i = O_i minus everything already
// claimed. Blocks keep their positions, so some may come out empty; that is
// legal and flagged rather than silently dropped.
struct Partition {
    std::vector<std::vector<int>> blocks;
    bool has_empty_block = false;
};

inline Partition cover_to_partition(const std::vector<std::vector<int>>& cover,
                                    int n_atoms) {
    if (n_atoms < 0)
        throw std::invalid_argument("cover_to_partition: negative universe size");
    std::vector<char> seen(static_cast<std::size_t>(n_atoms), 0);
    Partition out;
    out.blocks.reserve(cover.size());
    for (const auto& block : cover) {
        std::vector<int> kept;
        for (int idx : block) {
            if (idx < 0 || idx >= n_atoms)
                throw std::invalid_argument("cover_to_partition: index " +
                                            std::to_string(idx) + " outside universe of " +
                                            std::to_string(n_atoms) + " atoms");
            if (!seen[static_cast<std::size_t>(idx)]) {
                seen[static_cast<std::size_t>(idx)] = 1;
                kept.push_back(idx);
            }
        }
        std::sort(kept.begin(), kept.end());
        if (kept.empty()) out.has_empty_block = true;
        out.blocks.push_back(std::move(kept));
    }
    for (int i = 0; i < n_atoms; ++i)
        if (!seen[static_cast<std::size_t>(i)])
            throw std::invalid_argument("cover_to_partition: cover misses atom " +
                                        std::to_string(i));
    return out;
}

} // namespace ratelab
