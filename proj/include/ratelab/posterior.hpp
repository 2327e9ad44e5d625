#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ratelab/grid.hpp"
#include "ratelab/priors.hpp"
#include "ratelab/rng.hpp"

namespace ratelab {

// ---------- iid sampling ----------

// Observations are drawn from a grid density by inverse CDF over the cell
// masses plus a uniform position inside the chosen cell (two uniforms per
// observation, in that order; the determinism tests freeze this contract).
// Likelihood computations use the stored cell index, i.e. the observation is
// identified with its cell midpoint.
struct Sample {
    GridPtr grid;
    std::vector<double> values;
    std::vector<int> cells;
    std::uint64_t seed = 0;
    bool seeded = false;

    long long n() const { return static_cast<long long>(cells.size()); }
};

inline Sample sample_iid(const GridDensity& f0, long long n, std::uint64_t seed) {
    if (n < 0)
        throw std::invalid_argument("sample_iid: negative sample size");
    Sample out;
    out.grid = f0.grid;
    out.seed = seed;
    out.seeded = true;
    out.values.reserve(static_cast<std::size_t>(n));
    out.cells.reserve(static_cast<std::size_t>(n));
    if (n == 0) return out;

    int m = f0.grid->m;
    std::vector<double> cdf(static_cast<std::size_t>(m));
    CompensatedSum acc;
    for (int i = 0; i < m; ++i) {
        acc.add(f0.values[static_cast<std::size_t>(i)] * f0.grid->weight);
        cdf[static_cast<std::size_t>(i)] = acc.value();
    }
    double total = cdf[static_cast<std::size_t>(m - 1)];
    for (double& c : cdf) c /= total; // kill the ~1e-16 quadrature residue
    cdf[static_cast<std::size_t>(m - 1)] = 1.0;

    Rng rng(seed);
    for (long long k = 0; k < n; ++k) {
        double u = rng.uniform();
        int cell = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        cell = std::min(cell, m - 1);
        double pos = rng.uniform();
        out.cells.push_back(cell);
        out.values.push_back((cell + pos) / static_cast<double>(m));
    }
    return out;
}

// ---------- posterior over atoms ----------

// Immutable snapshot: per-atom accumulated log-likelihood plus the cell
// histogram of everything observed so far (the histogram is what makes
// marginal likelihood ratios against an arbitrary f0 possible after the
// fact). update() returns a new state.
struct PosteriorState {
    std::shared_ptr<const AtomicPrior> prior;
    std::vector<double> loglik;
    std::vector<long long> cell_counts;
    long long n = 0;
    std::vector<std::uint64_t> seed_lineage;
};

inline PosteriorState make_posterior(std::shared_ptr<const AtomicPrior> prior) {
    if (!prior) throw std::invalid_argument("make_posterior: null prior");
    PosteriorState st;
    st.prior = std::move(prior);
    st.loglik.assign(st.prior->atoms.size(), 0.0);
    st.cell_counts.assign(static_cast<std::size_t>(st.prior->grid->m), 0);
    return st;
}

inline PosteriorState update(const PosteriorState& state, const Sample& sample) {
    if (!state.prior) throw std::invalid_argument("update: state without prior");
    if (sample.n() > 0) {
        if (!sample.grid) throw std::invalid_argument("update: sample without grid");
        require_same_layout(*state.prior->grid, *sample.grid, "update");
    }
    PosteriorState out = state;
    int m = state.prior->grid->m;
    for (int c : sample.cells) {
        if (c < 0 || c >= m)
            throw std::invalid_argument("update: observation cell " + std::to_string(c) +
                                        " outside the grid");
        ++out.cell_counts[static_cast<std::size_t>(c)];
    }
    out.n += sample.n();
    if (sample.seeded) out.seed_lineage.push_back(sample.seed);

    // Small batches walk the observations directly; large ones collapse to a
    // histogram first so the per-atom cost is bounded by the cell count. The
    // two orders agree to a relative 1e-12 (covered by the sequential
    // consistency tests), and each path is deterministic.
    bool use_hist = sample.n() >= m / 4;
    std::vector<long long> hist;
    if (use_hist) {
        hist.assign(static_cast<std::size_t>(m), 0);
        for (int c : sample.cells) ++hist[static_cast<std::size_t>(c)];
    }
    for (std::size_t j = 0; j < out.loglik.size(); ++j) {
        const auto& values = state.prior->atoms[j].values;
        CompensatedSum acc;
        bool dead = false;
        if (use_hist) {
            for (int c = 0; c < m && !dead; ++c) {
                long long cnt = hist[static_cast<std::size_t>(c)];
                if (cnt == 0) continue;
                double v = values[static_cast<std::size_t>(c)];
                if (v == 0.0)
                    dead = true;
                else
                    acc.add(static_cast<double>(cnt) * std::log(v));
            }
        } else {
            for (int c : sample.cells) {
                double v = values[static_cast<std::size_t>(c)];
                if (v == 0.0) {
                    dead = true;
                    break;
                }
                acc.add(std::log(v));
            }
        }
        if (dead)
            out.loglik[j] = -std::numeric_limits<double>::infinity();
        else
            out.loglik[j] += acc.value();
    }

    bool any_alive = false;
    for (double l : out.loglik)
        if (!std::isinf(l)) { any_alive = true; break; }
    if (!any_alive)
        throw std::domain_error("update: every atom has zero likelihood at some "
                                "observation; the posterior is undefined");
    return out;
}

// log posterior weights, normalized by log-sum-exp with a max shift; atoms
// with zero likelihood stay at -infinity
inline std::vector<double> posterior_log_weights(const PosteriorState& state) {
    if (!state.prior) throw std::invalid_argument("posterior_log_weights: state without prior");
    std::size_t N = state.loglik.size();
    std::vector<double> lw(N);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < N; ++j) {
        lw[j] = std::log(state.prior->weights[j]) + state.loglik[j];
        mx = std::max(mx, lw[j]);
    }
    if (std::isinf(mx))
        throw std::domain_error("posterior_log_weights: the posterior is undefined");
    CompensatedSum z;
    for (std::size_t j = 0; j < N; ++j)
        if (!std::isinf(lw[j])) z.add(std::exp(lw[j] - mx));
    double logz = mx + std::log(z.value());
    for (double& v : lw) v -= logz;
    return lw;
}

inline std::vector<double> posterior_weights(const PosteriorState& state) {
    auto lw = posterior_log_weights(state);
    std::vector<double> w(lw.size());
    CompensatedSum s;
    for (std::size_t j = 0; j < lw.size(); ++j) {
        w[j] = std::isinf(lw[j]) ? 0.0 : std::exp(lw[j]);
        s.add(w[j]);
    }
    double total = s.value();
    for (double& v : w) v /= total;
    return w;
}

template <class Pred>
inline double posterior_mass(const PosteriorState& state, Pred&& pred) {
    auto w = posterior_weights(state);
    CompensatedSum s;
    for (std::size_t j = 0; j < w.size(); ++j)
        if (pred(state.prior->atoms[j])) s.add(w[j]);
    return s.value();
}

// log of the prior-mixture likelihood ratio integral against f0:
// log sum_j w_j exp(L_j - L_0), with L_0 the f0 log likelihood of the same
// observations. f0 must be strictly positive at every observed node.
inline double marginal_likelihood_ratio(const PosteriorState& state, const GridDensity& f0) {
    if (!state.prior) throw std::invalid_argument("marginal_likelihood_ratio: state without prior");
    require_same_layout(*state.prior->grid, *f0.grid, "marginal_likelihood_ratio");
    CompensatedSum l0;
    for (int c = 0; c < f0.grid->m; ++c) {
        long long cnt = state.cell_counts[static_cast<std::size_t>(c)];
        if (cnt == 0) continue;
        double v = f0.values[static_cast<std::size_t>(c)];
        if (v == 0.0)
            throw std::domain_error("marginal_likelihood_ratio: f0 is zero at observed node " +
                                    std::to_string(c));
        l0.add(static_cast<double>(cnt) * std::log(v));
    }
    double L0 = l0.value();

    std::size_t N = state.loglik.size();
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> shifted(N);
    for (std::size_t j = 0; j < N; ++j) {
        shifted[j] = std::log(state.prior->weights[j]) + state.loglik[j] - L0;
        mx = std::max(mx, shifted[j]);
    }
    if (std::isinf(mx))
        throw std::domain_error("marginal_likelihood_ratio: the posterior is undefined");
    CompensatedSum z;
    for (std::size_t j = 0; j < N; ++j)
        if (!std::isinf(shifted[j])) z.add(std::exp(shifted[j] - mx));
    return mx + std::log(z.value());
}

// Posterior-weighted mixture over a block of atom indices, renormalized on
// the grid. Blocks with zero posterior mass have no predictive density.
inline GridDensity predictive_density(const PosteriorState& state,
                                      const std::vector<int>& block) {
    if (!state.prior) throw std::invalid_argument("predictive_density: state without prior");
    if (block.empty())
        throw std::invalid_argument("predictive_density: empty block");
    auto w = posterior_weights(state);
    CompensatedSum block_mass;
    for (int j : block) {
        if (j < 0 || j >= static_cast<int>(w.size()))
            throw std::invalid_argument("predictive_density: atom index " + std::to_string(j) +
                                        " outside the prior");
        block_mass.add(w[static_cast<std::size_t>(j)]);
    }
    double bm = block_mass.value();
    if (!(bm > 0.0))
        throw std::domain_error("predictive_density: block carries zero posterior mass");

    int m = state.prior->grid->m;
    std::vector<double> values(static_cast<std::size_t>(m), 0.0);
    for (int j : block) {
        double wj = w[static_cast<std::size_t>(j)] / bm;
        if (wj == 0.0) continue;
        const auto& av = state.prior->atoms[static_cast<std::size_t>(j)].values;
        for (int i = 0; i < m; ++i) values[static_cast<std::size_t>(i)] += wj * av[static_cast<std::size_t>(i)];
    }
    return normalize(std::move(values), state.prior->grid, 0.0);
}

// ---------- snapshot export ----------

// CSV of atom_label,log_weight plus a JSON sidecar with the sample size and
// the seeds of every seeded batch folded in so far.
inline void save_posterior_snapshot(const PosteriorState& state, const std::string& csv_path,
                                    const std::string& header_path) {
    auto lw = posterior_log_weights(state);
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("save_posterior_snapshot: cannot open " + csv_path);
    csv << "atom_label,log_weight\n";
    for (std::size_t j = 0; j < lw.size(); ++j)
        csv << state.prior->labels[j] << ',' << format_double(lw[j]) << '\n';
    if (!csv) throw std::runtime_error("save_posterior_snapshot: write failed for " + csv_path);

    nlohmann::json header;
    header["n"] = state.n;
    header["grid_m"] = state.prior->grid->m;
    header["seeds"] = state.seed_lineage;
    std::ofstream hdr(header_path, std::ios::trunc);
    if (!hdr) throw std::runtime_error("save_posterior_snapshot: cannot open " + header_path);
    hdr << header.dump(2) << '\n';
    if (!hdr) throw std::runtime_error("save_posterior_snapshot: write failed for " + header_path);
}

} // namespace ratelab
