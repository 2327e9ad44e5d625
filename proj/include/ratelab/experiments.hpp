#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratelab/divergences.hpp"
#include "ratelab/entropy.hpp"
#include "ratelab/posterior.hpp"
#include "ratelab/priors.hpp"

namespace ratelab {

// Finite-n machinery behind the asymptotic contraction statements: evidence
// tail-bound verification by Monte Carlo, per-n hypothesis arithmetic for the
// five rate regimes, the infimal radius multiplier each regime certifies, and
// an empirical posterior-radius curve. Asymptotic conclusions themselves are
// not desk-checkable; everything here is exact finite-n arithmetic plus
// clearly labeled sampling error.

// ---------- rate regimes and their constants ----------

// The five regimes differ in which neighborhood anchors the prior-thickness
// condition, which exponent guards the sieve remainder, and whether the
// radius multiplier is a fixed r (as n grows) or any sequence r_n -> inf.
enum class TheoremId {
    theorem1,  // almost-sure, thickness in the directional ball W_eps
    corollary1, // theorem1 with one sieve for all n; entropy bound absorbs c2
    theorem2,  // in-probability, thickness in the K/V ball B_{eps^2}
    theorem3,  // fixed-dimension regime, n eps^2 >= c0, any r_n -> inf
    theorem4   // almost-sure variant of theorem3, n eps^2 >= c0 log n
};

inline std::string theorem_name(TheoremId id) {
    switch (id) {
        case TheoremId::theorem1: return "theorem1";
        case TheoremId::corollary1: return "corollary1";
        case TheoremId::theorem2: return "theorem2";
        case TheoremId::theorem3: return "theorem3";
        case TheoremId::theorem4: return "theorem4";
    }
    throw std::logic_error("theorem_name: unreachable");
}

inline TheoremId theorem_from_name(const std::string& name) {
    if (name == "theorem1") return TheoremId::theorem1;
    if (name == "corollary1") return TheoremId::corollary1;
    if (name == "theorem2" || name == "corollary3") return TheoremId::theorem2;
    if (name == "theorem3" || name == "corollary4") return TheoremId::theorem3;
    if (name == "theorem4" || name == "corollary5") return TheoremId::theorem4;
    throw std::invalid_argument("unknown rate regime \"" + name + "\"");
}

struct RateConstants {
    TheoremId which = TheoremId::theorem1;
    double alpha = 0.0;
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
};

// Strict admissibility for the chosen regime. rate_multiplier() itself only
// needs its formula's domain; this is the full hypothesis set.
inline void validate(const RateConstants& k) {
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string("rate constants: ") + name +
                                        " must be a nonnegative finite real");
    };
    nonneg(k.c0, "c0");
    nonneg(k.c1, "c1");
    nonneg(k.c2, "c2");
    nonneg(k.c3, "c3");
    if (!(k.alpha >= 0.0) || !(k.alpha < 1.0))
        throw std::invalid_argument("rate constants: alpha must lie in [0,1)");
    switch (k.which) {
        case TheoremId::theorem1:
            if (!(k.c1 > 0.0)) throw std::invalid_argument("rate constants: theorem1 needs c1 > 0");
            if (!(k.c2 > 0.0)) throw std::invalid_argument("rate constants: theorem1 needs c2 > 0");
            break;
        case TheoremId::corollary1:
            if (!(k.c2 > 0.0))
                throw std::invalid_argument("rate constants: corollary1 needs c2 > 0");
            break;
        case TheoremId::theorem2:
            if (!(k.c1 > 0.0)) throw std::invalid_argument("rate constants: theorem2 needs c1 > 0");
            break;
        case TheoremId::theorem3:
            if (!(k.alpha > 0.0))
                throw std::invalid_argument("rate constants: theorem3 needs alpha > 0");
            if (!(k.c0 > 0.0)) throw std::invalid_argument("rate constants: theorem3 needs c0 > 0");
            if (!(k.c1 < (1.0 - k.alpha) / 18.0))
                throw std::invalid_argument("rate constants: theorem3 needs c1 < (1-alpha)/18");
            break;
        case TheoremId::theorem4:
            if (!(k.alpha > 0.0))
                throw std::invalid_argument("rate constants: theorem4 needs alpha > 0");
            if (!(k.c0 > 0.0)) throw std::invalid_argument("rate constants: theorem4 needs c0 > 0");
            if (!(k.c1 < (1.0 - k.alpha) / 18.0))
                throw std::invalid_argument("rate constants: theorem4 needs c1 < (1-alpha)/18");
            if (!(k.c2 > 1.0 / k.c0))
                throw std::invalid_argument("rate constants: theorem4 needs c2 > 1/c0");
            break;
    }
}

// Infimal radius multiplier r certified by each regime:
//   theorem1    r = 2 + sqrt(2(3a + 2a c2 + a c3 + c1) / (1-a))
//   corollary1  same with c1 replaced by c1 + c2
//   theorem2    r = 2 + sqrt(2(2a + a c2 + c1) / (1-a))
//   theorem3    +inf (the conclusion holds for every r_n -> inf)
//   theorem4    smallest r with (3+2c2)a + (c1 + (a-1)/18)(r^2 - 1) <= -2/c0,
//               i.e. r = sqrt(1 + ((3+2c2)a + 2/c0) / ((1-a)/18 - c1))
inline double rate_multiplier(const RateConstants& k) {
    if (!(k.alpha >= 0.0) || !(k.alpha < 1.0))
        throw std::invalid_argument("rate_multiplier: alpha must lie in [0,1)");
    for (double c : {k.c0, k.c1, k.c2, k.c3})
        if (!(c >= 0.0) || !std::isfinite(c))
            throw std::invalid_argument("rate_multiplier: constants must be nonnegative finite");
    double a = k.alpha;
    switch (k.which) {
        case TheoremId::theorem1:
            return 2.0 + std::sqrt(2.0 * (3.0 * a + 2.0 * a * k.c2 + a * k.c3 + k.c1) / (1.0 - a));
        case TheoremId::corollary1:
            return 2.0 + std::sqrt(2.0 * (3.0 * a + 2.0 * a * k.c2 + a * k.c3 + k.c1 + k.c2) /
                                   (1.0 - a));
        case TheoremId::theorem2:
            return 2.0 + std::sqrt(2.0 * (2.0 * a + a * k.c2 + k.c1) / (1.0 - a));
        case TheoremId::theorem3:
            return std::numeric_limits<double>::infinity();
        case TheoremId::theorem4: {
            double denom = (1.0 - a) / 18.0 - k.c1;
            if (!(denom > 0.0))
                throw std::invalid_argument("rate_multiplier: theorem4 needs c1 < (1-alpha)/18");
            if (!(k.c0 > 0.0))
                throw std::invalid_argument("rate_multiplier: theorem4 needs c0 > 0");
            return std::sqrt(1.0 + ((3.0 + 2.0 * k.c2) * a + 2.0 / k.c0) / denom);
        }
    }
    throw std::logic_error("rate_multiplier: unreachable");
}

// ---------- neighborhoods ----------

enum class NeighborhoodKind {
    wstar,                // directional ball {f : H*(f0,f) <= radius}
    kv,                   // {f : K(f0,f) < radius^2 and V(f0,f) < radius^2}
    hellinger_complement  // {f : H(f0,f) >= radius}
};

struct NeighborhoodSpec {
    NeighborhoodKind kind = NeighborhoodKind::wstar;
    double radius = 0.0;
};

inline std::function<bool(const GridDensity&)> neighborhood_predicate(const NeighborhoodSpec& spec,
                                                                      const GridDensity& f0) {
    if (!(spec.radius > 0.0) || !std::isfinite(spec.radius))
        throw std::invalid_argument("neighborhood_predicate: radius must be positive and finite");
    GridDensity center = f0;
    double r = spec.radius;
    switch (spec.kind) {
        case NeighborhoodKind::wstar:
            return [center, r](const GridDensity& f) { return hstar_extended(center, f) <= r; };
        case NeighborhoodKind::kv:
            return [center, r](const GridDensity& f) {
                return kl(center, f) < r * r && v_divergence(center, f) < r * r;
            };
        case NeighborhoodKind::hellinger_complement:
            return [center, r](const GridDensity& f) { return hellinger(center, f) >= r; };
    }
    throw std::logic_error("neighborhood_predicate: unreachable");
}

// ---------- evidence tail bound, verified by Monte Carlo ----------

// The bound under test: for any eps > 0, c > 0,
//   P( integral of the likelihood ratio against the prior
//        <= e^{-n eps^2 (3+2c)} * Pi(W_eps) )  <=  e^{-n eps^2 c}.
// One replication draws n observations from f0 and computes the log marginal
// likelihood ratio; the verifier counts threshold crossings.

struct Lemma1Result {
    long long n = 0;
    double eps = 0.0;
    double c = 0.0;
    long long reps = 0;
    std::uint64_t seed = 0;
    double prior_mass_w = 0.0; // Pi(W_eps)
    double threshold = 0.0;    // -n eps^2 (3+2c) + log Pi(W_eps)
    double empirical_prob = 0.0;
    double bound = 0.0;        // e^{-n eps^2 c}
    bool vacuous = false;      // Pi(W_eps) = 0: event impossible, bound moot
    bool pass = false;
};

// Pi(W_eps) over the prior atoms (the truncated tail counts as outside).
inline double wstar_ball_mass(const AtomicPrior& prior, const GridDensity& f0, double eps) {
    require_same_layout(*prior.grid, *f0.grid, "wstar_ball_mass");
    return prior_mass(prior,
                      [&](const GridDensity& f) { return hstar_extended(f0, f) <= eps; });
}

// Log marginal likelihood ratio of one fresh replication.
inline double replicate_log_evidence(const AtomicPrior& prior, const GridDensity& f0,
                                     long long n, std::uint64_t seed) {
    auto shared = std::make_shared<const AtomicPrior>(prior);
    PosteriorState st = update(make_posterior(shared), sample_iid(f0, n, seed));
    return marginal_likelihood_ratio(st, f0);
}

inline Lemma1Result verify_lemma1(const AtomicPrior& prior, const GridDensity& f0, long long n,
                                  double eps, double c, long long reps, std::uint64_t seed) {
    if (reps < 1000)
        throw std::invalid_argument("verify_lemma1: need at least 1000 replications, got " +
                                    std::to_string(reps));
    if (n < 1) throw std::invalid_argument("verify_lemma1: sample size must be positive");
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw std::invalid_argument("verify_lemma1: eps must be positive and finite");
    if (!(c > 0.0) || !std::isfinite(c))
        throw std::invalid_argument("verify_lemma1: c must be positive and finite");
    require_same_layout(*prior.grid, *f0.grid, "verify_lemma1");

    Lemma1Result res;
    res.n = n;
    res.eps = eps;
    res.c = c;
    res.reps = reps;
    res.seed = seed;
    double ne2 = static_cast<double>(n) * eps * eps;
    res.bound = std::exp(-ne2 * c);
    res.prior_mass_w = wstar_ball_mass(prior, f0, eps);
    if (res.prior_mass_w <= 0.0) {
        res.vacuous = true;
        res.threshold = -std::numeric_limits<double>::infinity();
        res.empirical_prob = 0.0;
        res.pass = true;
        return res;
    }
    res.threshold = -ne2 * (3.0 + 2.0 * c) + std::log(res.prior_mass_w);

    auto shared = std::make_shared<const AtomicPrior>(prior);
    long long hits = 0;
    for (long long rep = 0; rep < reps; ++rep) {
        PosteriorState st = update(make_posterior(shared),
                                   sample_iid(f0, n, seed + static_cast<std::uint64_t>(rep)));
        if (marginal_likelihood_ratio(st, f0) <= res.threshold) ++hits;
    }
    res.empirical_prob = static_cast<double>(hits) / static_cast<double>(reps);
    double sigma = std::sqrt(res.bound * (1.0 - res.bound) / static_cast<double>(reps));
    res.pass = res.empirical_prob <= res.bound + 3.0 * sigma;
    return res;
}

// ---------- per-n hypothesis arithmetic ----------

struct ConditionEntry {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

struct ShellEntry {
    int j = 0;            // shell index: atoms with j eps <= H(f0,.) < 2 j eps
    long long atom_count = 0;
    double j_value = 0.0; // entropy of the shell at radius j eps / 3
    double bound = 0.0;   // c1 j^2 n eps^2 + alpha log(anchor mass)
    bool holds = false;
    SolveMethod method = SolveMethod::exact;
};

struct ConditionReport {
    TheoremId which = TheoremId::theorem1;
    long long n = 0;
    double eps = 0.0;
    double multiplier = 0.0;
    double j_value = std::numeric_limits<double>::quiet_NaN(); // entropy side of condition (1)
    SolveMethod j_method = SolveMethod::exact;
    std::vector<ConditionEntry> entries;
    std::vector<ShellEntry> shells;
    bool all_hold = false;
};

// Evaluates every hypothesis of the chosen regime at one (n, eps), with the
// prior truncated-tail mass counted pessimistically: as sieve remainder and
// never as thickness. Summability across n is out of scope by design; each
// summand is reported as the per-n inequality it must eventually satisfy.
// Failed conditions are reported, never thrown.
inline ConditionReport check_conditions(const AtomicPrior& prior, const GridDensity& f0,
                                        const std::vector<int>& sieve, double eps,
                                        const RateConstants& constants, long long n) {
    validate(constants);
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw std::invalid_argument("check_conditions: eps must be positive and finite");
    if (n < 1) throw std::invalid_argument("check_conditions: sample size must be positive");
    require_same_layout(*prior.grid, *f0.grid, "check_conditions");

    std::vector<char> in_sieve(static_cast<std::size_t>(prior.size()), 0);
    for (int i : sieve) {
        if (i < 0 || i >= prior.size())
            throw std::invalid_argument("check_conditions: sieve index " + std::to_string(i) +
                                        " outside the prior");
        in_sieve[static_cast<std::size_t>(i)] = 1;
    }

    std::size_t natoms = static_cast<std::size_t>(prior.size());
    std::vector<double> hdist(natoms);
    for (std::size_t j = 0; j < natoms; ++j) hdist[j] = hellinger(f0, prior.atoms[j]);

    ConditionReport rep;
    rep.which = constants.which;
    rep.n = n;
    rep.eps = eps;
    rep.multiplier = rate_multiplier(constants);
    double ne2 = static_cast<double>(n) * eps * eps;
    double a = constants.alpha;

    auto mass_where = [&](auto&& keep) {
        CompensatedSum s;
        for (std::size_t j = 0; j < natoms; ++j)
            if (keep(j)) s.add(prior.weights[j]);
        return s.value();
    };
    // remainder after the sieve; "far" additionally demands H(f0,.) >= eps
    double far_remainder = prior.tail_mass +
                           mass_where([&](std::size_t j) {
                               return !in_sieve[j] && hdist[j] >= eps;
                           });
    double full_remainder = prior.tail_mass +
                            mass_where([&](std::size_t j) { return !in_sieve[j]; });
    double w_mass = mass_where([&](std::size_t j) {
        return hstar_extended(f0, prior.atoms[j]) <= eps;
    });
    double b_mass = mass_where([&](std::size_t j) {
        double e2 = eps * eps;
        return kl(f0, prior.atoms[j]) < e2 && v_divergence(f0, prior.atoms[j]) < e2;
    });

    auto push = [&](std::string name, double lhs, double rhs, bool holds) {
        rep.entries.push_back({std::move(name), lhs, rhs, holds});
    };
    // e^{x} * remainder / anchor <= 1, with the 0/0 = 0 convention
    auto ratio_entry = [&](double log_scale, double remainder, double anchor) {
        double lhs;
        if (anchor <= 0.0)
            lhs = remainder <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        else
            lhs = std::exp(log_scale) * remainder / anchor;
        push("remainder_ratio", lhs, 1.0, lhs <= 1.0);
    };
    auto shell_conditions = [&](double anchor_mass) {
        double log_anchor = anchor_mass > 0.0 ? std::log(anchor_mass)
                                              : -std::numeric_limits<double>::infinity();
        int jmax = static_cast<int>(std::ceil(std::sqrt(2.0) / eps));
        for (int j = 1; j <= jmax; ++j) {
            std::vector<int> shell;
            for (std::size_t t = 0; t < natoms; ++t)
                if (in_sieve[t] && hdist[t] >= j * eps && hdist[t] < 2.0 * j * eps)
                    shell.push_back(static_cast<int>(t));
            auto ent = hausdorff_entropy(prior, shell, j * eps / 3.0, a);
            ShellEntry se;
            se.j = j;
            se.atom_count = static_cast<long long>(shell.size());
            se.j_value = ent.j_value;
            se.bound = constants.c1 * static_cast<double>(j) * static_cast<double>(j) * ne2 +
                       a * log_anchor;
            se.holds = se.j_value <= se.bound;
            se.method = ent.method;
            rep.shells.push_back(se);
        }
    };

    switch (constants.which) {
        case TheoremId::theorem1:
        case TheoremId::corollary1:
        case TheoremId::theorem2: {
            auto ent = hausdorff_entropy(prior, sieve, eps, a);
            rep.j_value = ent.j_value;
            rep.j_method = ent.method;
            push("entropy", ent.j_value, constants.c1 * ne2, ent.j_value <= constants.c1 * ne2);
            if (constants.which == TheoremId::theorem2) {
                push("sieve_remainder", far_remainder, std::exp(-ne2 * (2.0 + constants.c2)),
                     far_remainder <= std::exp(-ne2 * (2.0 + constants.c2)));
                push("prior_thickness", b_mass, std::exp(-ne2 * constants.c2),
                     b_mass >= std::exp(-ne2 * constants.c2));
            } else {
                double guard = 3.0 + 3.0 * constants.c2 + constants.c3;
                double remainder = constants.which == TheoremId::corollary1 ? full_remainder
                                                                            : far_remainder;
                push("sieve_remainder", remainder, std::exp(-ne2 * guard),
                     remainder <= std::exp(-ne2 * guard));
                push("prior_thickness", w_mass, std::exp(-ne2 * constants.c3),
                     w_mass >= std::exp(-ne2 * constants.c3));
            }
            break;
        }
        case TheoremId::theorem3: {
            push("growth", ne2, constants.c0, ne2 >= constants.c0);
            ratio_entry(2.0 * ne2, far_remainder, b_mass);
            shell_conditions(b_mass);
            break;
        }
        case TheoremId::theorem4: {
            double rhs = constants.c0 * std::log(static_cast<double>(n));
            push("growth", ne2, rhs, ne2 >= rhs);
            ratio_entry(ne2 * (3.0 + 2.0 * constants.c2), far_remainder, w_mass);
            shell_conditions(w_mass);
            break;
        }
    }

    rep.all_hold = true;
    for (const auto& e : rep.entries) rep.all_hold = rep.all_hold && e.holds;
    for (const auto& s : rep.shells) rep.all_hold = rep.all_hold && s.holds;
    return rep;
}

// ---------- empirical contraction curve ----------

struct CurvePoint {
    long long n = 0;
    double median_radius = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

struct CurveResult {
    std::vector<CurvePoint> points;
    std::vector<std::vector<double>> radii; // radii[rep][i] pairs with ns[i]
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (sorted.size() == 1) return sorted.front();
    double h = p * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

// Distance levels (descending, ties grouped) shared by every replication.
struct RadiusScanner {
    std::vector<std::vector<std::size_t>> level_atoms; // atom indices per level
    std::vector<double> level_dist;

    RadiusScanner(const AtomicPrior& prior, const GridDensity& f0) {
        std::size_t natoms = static_cast<std::size_t>(prior.size());
        std::vector<double> d(natoms);
        for (std::size_t j = 0; j < natoms; ++j) d[j] = hellinger(f0, prior.atoms[j]);
        std::vector<std::size_t> order(natoms);
        for (std::size_t j = 0; j < natoms; ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            if (d[x] != d[y]) return d[x] > d[y];
            return x < y;
        });
        for (std::size_t j = 0; j < natoms; ++j) {
            if (j == 0 || d[order[j]] != level_dist.back()) {
                level_dist.push_back(d[order[j]]);
                level_atoms.emplace_back();
            }
            level_atoms.back().push_back(order[j]);
        }
    }

    // smallest rho with posterior mass of {H(f0,.) >= rho} at most the target:
    // walk levels outside-in; the first level whose inclusion tips the tail
    // mass over the target is the infimum
    double radius(const std::vector<double>& weights, double mass_target) const {
        CompensatedSum tail;
        for (std::size_t lv = 0; lv < level_dist.size(); ++lv) {
            for (std::size_t j : level_atoms[lv]) tail.add(weights[j]);
            if (tail.value() > mass_target) return level_dist[lv];
        }
        return 0.0; // total mass within target: every radius qualifies
    }
};

} // namespace detail

// Median (with quartiles) over replications of the posterior tail radius at
// each sample size. Replication r draws its largest sample once with seed
// seed + r and reuses prefixes, so radii at successive n are coupled within a
// replication and independent across replications.
inline CurveResult contraction_curve(const AtomicPrior& prior, const GridDensity& f0,
                                     const std::vector<long long>& ns, double mass_target,
                                     long long reps, std::uint64_t seed) {
    if (ns.empty()) throw std::invalid_argument("contraction_curve: no sample sizes");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] < 0) throw std::invalid_argument("contraction_curve: negative sample size");
        if (i > 0 && ns[i] <= ns[i - 1])
            throw std::invalid_argument("contraction_curve: sample sizes must increase");
    }
    if (!(mass_target > 0.0) || !(mass_target < 1.0))
        throw std::invalid_argument("contraction_curve: mass target must lie in (0,1)");
    if (reps < 1) throw std::invalid_argument("contraction_curve: need at least one replication");
    require_same_layout(*prior.grid, *f0.grid, "contraction_curve");

    detail::RadiusScanner scanner(prior, f0);
    auto shared = std::make_shared<const AtomicPrior>(prior);

    CurveResult out;
    out.radii.assign(static_cast<std::size_t>(reps), std::vector<double>(ns.size(), 0.0));
    for (long long r = 0; r < reps; ++r) {
        Sample full = sample_iid(f0, ns.back(), seed + static_cast<std::uint64_t>(r));
        PosteriorState st = make_posterior(shared);
        long long taken = 0;
        for (std::size_t i = 0; i < ns.size(); ++i) {
            if (ns[i] > taken) {
                Sample chunk;
                chunk.grid = full.grid;
                chunk.seed = full.seed;
                chunk.seeded = true;
                chunk.cells.assign(full.cells.begin() + taken, full.cells.begin() + ns[i]);
                chunk.values.assign(full.values.begin() + taken, full.values.begin() + ns[i]);
                st = update(st, chunk);
                taken = ns[i];
            }
            out.radii[static_cast<std::size_t>(r)][i] =
                scanner.radius(posterior_weights(st), mass_target);
        }
    }
    for (std::size_t i = 0; i < ns.size(); ++i) {
        std::vector<double> column(static_cast<std::size_t>(reps));
        for (long long r = 0; r < reps; ++r)
            column[static_cast<std::size_t>(r)] = out.radii[static_cast<std::size_t>(r)][i];
        std::sort(column.begin(), column.end());
        CurvePoint pt;
        pt.n = ns[i];
        pt.median_radius = detail::quantile_sorted(column, 0.5);
        pt.q25 = detail::quantile_sorted(column, 0.25);
        pt.q75 = detail::quantile_sorted(column, 0.75);
        out.points.push_back(pt);
    }
    return out;
}

} // namespace ratelab
