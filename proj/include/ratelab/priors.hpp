#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ratelab/families.hpp"
#include "ratelab/grid.hpp"

namespace ratelab {

// Finitely supported prior over grid densities. Weights are strictly
// positive and renormalized to sum to 1 at construction; tail_mass records
// the probability a truncating constructor discarded, which the condition
// checkers count as sitting outside every sieve.
struct AtomicPrior {
    GridPtr grid;
    std::vector<GridDensity> atoms;
    std::vector<double> weights;
    std::vector<std::string> labels;
    double tail_mass = 0.0;

    int size() const { return static_cast<int>(atoms.size()); }
};

inline constexpr long long kDefaultAtomCap = 1'000'000;

inline AtomicPrior make_atomic_prior(std::vector<GridDensity> atoms,
                                     std::vector<double> weights,
                                     std::vector<std::string> labels = {},
                                     double tail_mass = 0.0) {
    if (atoms.empty())
        throw std::invalid_argument("make_atomic_prior: empty atom list");
    if (weights.size() != atoms.size())
        throw std::invalid_argument("make_atomic_prior: " + std::to_string(weights.size()) +
                                    " weights for " + std::to_string(atoms.size()) + " atoms");
    if (!labels.empty() && labels.size() != atoms.size())
        throw std::invalid_argument("make_atomic_prior: label count mismatch");
    for (std::size_t i = 1; i < atoms.size(); ++i)
        require_same_layout(*atoms[0].grid, *atoms[i].grid, "make_atomic_prior");
    if (!(tail_mass >= 0.0) || tail_mass >= 1.0)
        throw std::invalid_argument("make_atomic_prior: tail mass must lie in [0,1)");

    CompensatedSum total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!std::isfinite(weights[i]) || weights[i] <= 0.0)
            throw std::invalid_argument("make_atomic_prior: weight " + std::to_string(i) +
                                        " must be strictly positive");
        total.add(weights[i]);
    }
    double s = total.value();
    for (double& w : weights) w /= s;

    AtomicPrior out;
    out.grid = atoms[0].grid;
    out.atoms = std::move(atoms);
    out.weights = std::move(weights);
    out.tail_mass = tail_mass;
    if (labels.empty()) {
        out.labels.reserve(out.atoms.size());
        for (std::size_t i = 0; i < out.atoms.size(); ++i)
            out.labels.push_back("atom=" + std::to_string(i));
    } else {
        out.labels = std::move(labels);
    }
    return out;
}

inline AtomicPrior uniform_atoms(std::vector<GridDensity> atoms,
                                 std::vector<std::string> labels = {}) {
    if (atoms.empty())
        throw std::invalid_argument("uniform_atoms: empty atom list");
    std::vector<double> weights(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
    return make_atomic_prior(std::move(atoms), std::move(weights), std::move(labels));
}

// ---------- sieve mixtures ----------

// Level-structured prior: within level j, mass a_j splits uniformly over the
// level's atoms. The enumerated levels may be a prefix of an infinite
// mixture, so the level weights must only sum to at most 1; whatever is not
// enumerated or is truncated away becomes the reported tail mass.
struct SieveSpec {
    std::vector<std::vector<GridDensity>> levels;
    std::vector<double> level_weights;
};

inline void validate(const SieveSpec& spec) {
    if (spec.levels.empty())
        throw std::invalid_argument("SieveSpec: no levels");
    if (spec.level_weights.size() != spec.levels.size())
        throw std::invalid_argument("SieveSpec: " + std::to_string(spec.level_weights.size()) +
                                    " weights for " + std::to_string(spec.levels.size()) +
                                    " levels");
    CompensatedSum s;
    for (std::size_t j = 0; j < spec.levels.size(); ++j) {
        if (spec.levels[j].empty())
            throw std::invalid_argument("SieveSpec: level " + std::to_string(j + 1) +
                                        " is empty");
        if (!std::isfinite(spec.level_weights[j]) || spec.level_weights[j] <= 0.0)
            throw std::invalid_argument("SieveSpec: level weight " + std::to_string(j + 1) +
                                        " must be strictly positive");
        s.add(spec.level_weights[j]);
    }
    if (s.value() > 1.0 + 1e-12)
        throw std::invalid_argument("SieveSpec: level weights sum to " +
                                    std::to_string(s.value()) + ", more than 1");
}

inline AtomicPrior sieve_mixture(const SieveSpec& spec, int truncate_at) {
    validate(spec);
    if (truncate_at < 1)
        throw std::invalid_argument("sieve_mixture: truncation level must be >= 1");
    std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(truncate_at),
                                             spec.levels.size());
    std::vector<GridDensity> atoms;
    std::vector<double> weights;
    std::vector<std::string> labels;
    CompensatedSum kept_mass;
    for (std::size_t j = 0; j < keep; ++j) {
        double per_atom = spec.level_weights[j] / static_cast<double>(spec.levels[j].size());
        kept_mass.add(spec.level_weights[j]);
        for (std::size_t i = 0; i < spec.levels[j].size(); ++i) {
            atoms.push_back(spec.levels[j][i]);
            weights.push_back(per_atom);
            labels.push_back("level=" + std::to_string(j + 1) + ",atom=" + std::to_string(i));
        }
    }
    double tail = std::max(0.0, 1.0 - kept_mass.value());
    return make_atomic_prior(std::move(atoms), std::move(weights), std::move(labels), tail);
}

// ---------- Bernstein order-mixture priors ----------

// Order k gets prior mass rho(k) (a probability mass function on orders,
// summed to at most 1 over the kept range), split uniformly over a simplex
// lattice. The lattice resolution R for order k is the largest integer with
// C(R+k-1, k-1) <= weight_cells^(k-1) lattice points, matching the cap the
// order-k simplex is allowed.
struct BernsteinPriorResult {
    AtomicPrior prior;
    double tail_mass = 0.0;
    double c0_max = 0.0; // inf over 2 <= j <= kmax of (-log rho(j)) / (j log j)
    std::vector<long long> atoms_per_order;
};

namespace detail {

inline double lattice_point_count(long long r, int k) {
    // C(r + k - 1, k - 1) computed in floating point; overflow to inf is fine,
    // it only signals "over the cap"
    double c = 1.0;
    for (int i = 1; i <= k - 1; ++i)
        c *= static_cast<double>(r + i) / static_cast<double>(i);
    return c;
}

template <class Emit>
inline void enumerate_compositions(int parts, long long total, std::vector<long long>& cur,
                                   Emit&& emit) {
    if (parts == 1) {
        cur.push_back(total);
        emit(cur);
        cur.pop_back();
        return;
    }
    for (long long c = 0; c <= total; ++c) {
        cur.push_back(c);
        enumerate_compositions(parts - 1, total - c, cur, emit);
        cur.pop_back();
    }
}

} // namespace detail

inline BernsteinPriorResult bernstein_prior(const std::function<double(int)>& rho, int kmax,
                                            long long weight_cells, const GridPtr& grid,
                                            double floor = 0.0,
                                            long long atom_cap = kDefaultAtomCap) {
    if (!grid) throw std::invalid_argument("bernstein_prior: null grid");
    if (kmax < 1)
        throw std::invalid_argument("bernstein_prior: kmax must be >= 1");
    if (weight_cells < 1)
        throw std::invalid_argument("bernstein_prior: weight_cells must be >= 1");
    if (atom_cap < 1)
        throw std::invalid_argument("bernstein_prior: atom cap must be >= 1");

    std::vector<double> order_mass(static_cast<std::size_t>(kmax) + 1, 0.0);
    CompensatedSum rho_sum;
    double c0_max = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= kmax; ++k) {
        double r = rho(k);
        if (!std::isfinite(r) || r < 0.0)
            throw std::invalid_argument("bernstein_prior: rho(" + std::to_string(k) +
                                        ") must be finite and nonnegative");
        order_mass[static_cast<std::size_t>(k)] = r;
        rho_sum.add(r);
        if (k >= 2 && r > 0.0)
            c0_max = std::min(c0_max, -std::log(r) / (k * std::log(static_cast<double>(k))));
    }
    if (!(rho_sum.value() > 0.0))
        throw std::invalid_argument("bernstein_prior: rho vanishes on every kept order");

    std::vector<GridDensity> atoms;
    std::vector<double> weights;
    std::vector<std::string> labels;
    std::vector<long long> per_order;
    long long total_atoms = 0;
    for (int k = 1; k <= kmax; ++k) {
        if (order_mass[static_cast<std::size_t>(k)] == 0.0) {
            per_order.push_back(0);
            continue;
        }
        double cap = std::pow(static_cast<double>(weight_cells), k - 1);
        // the order-1 simplex is the single point (1); any resolution works
        long long r = 1;
        if (k > 1) {
            r = 0;
            while (detail::lattice_point_count(r + 1, k) <= cap) ++r;
        }
        if (r < 1)
            throw std::invalid_argument("bernstein_prior: weight_cells=" +
                                        std::to_string(weight_cells) +
                                        " caps the order-" + std::to_string(k) +
                                        " simplex below its " + std::to_string(k) +
                                        " vertices; no lattice fits");
        long long count = static_cast<long long>(detail::lattice_point_count(r, k));
        if (total_atoms + count > atom_cap)
            throw std::invalid_argument("bernstein_prior: atom cap of " +
                                        std::to_string(atom_cap) + " exceeded at order " +
                                        std::to_string(k));
        per_order.push_back(count);
        total_atoms += count;
        double per_atom = order_mass[static_cast<std::size_t>(k)] / static_cast<double>(count);
        long long cell = 0;
        std::vector<long long> cur;
        detail::enumerate_compositions(k, r, cur, [&](const std::vector<long long>& comp) {
            BernsteinSpec bs;
            bs.k = k;
            bs.weights.reserve(static_cast<std::size_t>(k));
            for (long long c : comp)
                bs.weights.push_back(static_cast<double>(c) / static_cast<double>(r));
            atoms.push_back(bernstein_density(bs, grid, floor));
            weights.push_back(per_atom);
            labels.push_back("k=" + std::to_string(k) + ",cell=" + std::to_string(cell));
            ++cell;
        });
    }

    BernsteinPriorResult out;
    out.tail_mass = std::max(0.0, 1.0 - rho_sum.value());
    out.c0_max = c0_max;
    out.atoms_per_order = std::move(per_order);
    out.prior = make_atomic_prior(std::move(atoms), std::move(weights), std::move(labels),
                                  out.tail_mass);
    return out;
}

// ---------- box-uniform parameter lattice ----------

// Uniform prior over a smooth family evaluated on a regular lattice of its
// parameter box (points_per_dim per axis, endpoints included).
inline AtomicPrior family_lattice_prior(const SmoothFamilySpec& spec, int points_per_dim,
                                        const GridPtr& grid, double floor = 0.0,
                                        long long atom_cap = kDefaultAtomCap) {
    validate(spec);
    if (points_per_dim < 1)
        throw std::invalid_argument("family_lattice_prior: need at least one point per axis");
    int d = spec.d();
    double count = std::pow(static_cast<double>(points_per_dim), d);
    if (count > static_cast<double>(atom_cap))
        throw std::invalid_argument("family_lattice_prior: lattice of " +
                                    std::to_string(count) + " atoms exceeds cap " +
                                    std::to_string(atom_cap));

    std::vector<GridDensity> atoms;
    std::vector<std::string> labels;
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> theta(static_cast<std::size_t>(d));
    for (;;) {
        std::string label = "theta=(";
        for (int p = 0; p < d; ++p) {
            const auto& iv = spec.box[static_cast<std::size_t>(p)];
            double t = points_per_dim == 1
                           ? 0.5 * (iv[0] + iv[1])
                           : iv[0] + (iv[1] - iv[0]) * idx[static_cast<std::size_t>(p)] /
                                         static_cast<double>(points_per_dim - 1);
            theta[static_cast<std::size_t>(p)] = t;
            label += format_double(t);
            label += (p + 1 < d) ? "," : ")";
        }
        atoms.push_back(smooth_family_density(spec, theta, grid, floor));
        labels.push_back(std::move(label));
        int p = d - 1;
        while (p >= 0 && ++idx[static_cast<std::size_t>(p)] == points_per_dim) {
            idx[static_cast<std::size_t>(p)] = 0;
            --p;
        }
        if (p < 0) break;
    }
    return uniform_atoms(std::move(atoms), std::move(labels));
}

// ---------- prior mass ----------

template <class Pred>
inline double prior_mass(const AtomicPrior& prior, Pred&& pred) {
    CompensatedSum s;
    for (std::size_t i = 0; i < prior.atoms.size(); ++i)
        if (pred(prior.atoms[i])) s.add(prior.weights[i]);
    return s.value();
}

// ---------- persistence ----------

// Directory layout: prior.json carries weights, labels, floors, grid size and
// the storage flavor; atom values sit either in one packed CSV (small priors)
// or in one node,value CSV per atom.
inline void save_prior(const AtomicPrior& prior, const std::string& dir, bool packed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json meta;
    meta["grid_m"] = prior.grid->m;
    meta["packed"] = packed;
    meta["weights"] = prior.weights;
    meta["labels"] = prior.labels;
    meta["tail_mass"] = prior.tail_mass;
    std::vector<double> floors;
    floors.reserve(prior.atoms.size());
    for (const auto& a : prior.atoms) floors.push_back(a.floor);
    meta["floors"] = floors;

    if (packed) {
        meta["packed_file"] = "atoms.csv";
        std::ofstream out(fs::path(dir) / "atoms.csv", std::ios::trunc);
        if (!out) throw std::runtime_error("save_prior: cannot open packed atom file");
        out << "node";
        for (std::size_t j = 0; j < prior.atoms.size(); ++j) out << ",atom_" << j;
        out << '\n';
        for (int i = 0; i < prior.grid->m; ++i) {
            out << format_double(prior.grid->nodes[static_cast<std::size_t>(i)]);
            for (const auto& a : prior.atoms)
                out << ',' << format_double(a.values[static_cast<std::size_t>(i)]);
            out << '\n';
        }
        if (!out) throw std::runtime_error("save_prior: packed atom write failed");
    } else {
        int width = 1;
        for (std::size_t n = prior.atoms.size(); n >= 10; n /= 10) ++width;
        std::vector<std::string> files;
        for (std::size_t j = 0; j < prior.atoms.size(); ++j) {
            std::string name = std::to_string(j);
            name.insert(0, static_cast<std::size_t>(width) - name.size(), '0');
            name = "atom_" + name + ".csv";
            save_density_csv(prior.atoms[j], (fs::path(dir) / name).string());
            files.push_back(std::move(name));
        }
        meta["atom_files"] = files;
    }
    std::ofstream out(fs::path(dir) / "prior.json", std::ios::trunc);
    if (!out) throw std::runtime_error("save_prior: cannot open prior.json");
    out << meta.dump(2) << '\n';
    if (!out) throw std::runtime_error("save_prior: prior.json write failed");
}

inline AtomicPrior load_prior(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "prior.json");
    if (!in) throw std::runtime_error("load_prior: cannot open " + dir + "/prior.json");
    nlohmann::json meta = nlohmann::json::parse(in);

    int m = meta.at("grid_m").get<int>();
    auto grid = make_grid(m);
    auto weights = meta.at("weights").get<std::vector<double>>();
    auto labels = meta.at("labels").get<std::vector<std::string>>();
    auto floors = meta.at("floors").get<std::vector<double>>();
    double tail = meta.at("tail_mass").get<double>();
    if (weights.size() != labels.size() || weights.size() != floors.size())
        throw std::runtime_error("load_prior: inconsistent metadata sizes");

    std::vector<GridDensity> atoms;
    if (meta.at("packed").get<bool>()) {
        std::ifstream pk(fs::path(dir) / meta.at("packed_file").get<std::string>());
        if (!pk) throw std::runtime_error("load_prior: cannot open packed atom file");
        std::string line;
        if (!std::getline(pk, line))
            throw std::runtime_error("load_prior: packed atom file is empty");
        std::vector<std::vector<double>> cols(weights.size());
        while (std::getline(pk, line)) {
            if (line.empty()) continue;
            std::size_t pos = line.find(',');
            for (std::size_t j = 0; j < weights.size(); ++j) {
                if (pos == std::string::npos)
                    throw std::runtime_error("load_prior: short packed row");
                std::size_t next = line.find(',', pos + 1);
                cols[j].push_back(parse_double(
                    line.substr(pos + 1, next == std::string::npos ? next : next - pos - 1),
                    "load_prior"));
                pos = next;
            }
        }
        for (std::size_t j = 0; j < cols.size(); ++j)
            atoms.push_back(normalize(std::move(cols[j]), grid, floors[j]));
    } else {
        auto files = meta.at("atom_files").get<std::vector<std::string>>();
        if (files.size() != weights.size())
            throw std::runtime_error("load_prior: atom file count mismatch");
        for (std::size_t j = 0; j < files.size(); ++j)
            atoms.push_back(load_density_csv((fs::path(dir) / files[j]).string(), floors[j]));
    }
    return make_atomic_prior(std::move(atoms), std::move(weights), std::move(labels), tail);
}

} // namespace ratelab
