#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ratelab/experiments.hpp"
#include "ratelab/families.hpp"
#include "ratelab/grid.hpp"
#include "ratelab/priors.hpp"

namespace ratelab {

// JSON experiment configuration. Parsing is strict: every object is checked
// against the exact key set its kind admits, and the first unknown key aborts
// with its name. Scalar leaves (seed, grid size, output path) can be
// overridden from the command line after parsing.

namespace detail {

using Json = nlohmann::ordered_json;

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    if (!obj.is_object())
        throw std::invalid_argument(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key))
            throw std::invalid_argument(where + ": unknown config key \"" + key + "\"");
    }
}

inline const Json& require_key(const Json& obj, const std::string& key,
                               const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw std::invalid_argument(where + ": missing required key \"" + key + "\"");
    return *it;
}

inline std::vector<double> real_vector(const Json& j, const std::string& where) {
    if (!j.is_array()) throw std::invalid_argument(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw std::invalid_argument(where + " must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::vector<int> int_vector(const Json& j, const std::string& where) {
    if (!j.is_array()) throw std::invalid_argument(where + " must be an array of integers");
    std::vector<int> out;
    for (const auto& v : j) {
        if (!v.is_number_integer())
            throw std::invalid_argument(where + " must contain only integers");
        out.push_back(v.get<int>());
    }
    return out;
}

} // namespace detail

// ---------- density specs ----------

inline SmoothFamilySpec parse_smooth_family(const detail::Json& spec, const std::string& where) {
    detail::reject_unknown_keys(spec, {"features", "box", "beta"}, where);
    SmoothFamilySpec fam;
    const auto& features = detail::require_key(spec, "features", where);
    if (!features.is_array() || features.empty())
        throw std::invalid_argument(where + ": \"features\" must be a nonempty array");
    for (const auto& fj : features) {
        detail::reject_unknown_keys(fj, {"kind", "order"}, where + ".features[]");
        std::string kind = detail::require_key(fj, "kind", where + ".features[]").get<std::string>();
        Feature f;
        if (kind == "centered_monomial") f.kind = Feature::Kind::centered_monomial;
        else if (kind == "cosine") f.kind = Feature::Kind::cosine;
        else if (kind == "sine") f.kind = Feature::Kind::sine;
        else
            throw std::invalid_argument(where + ": unknown feature kind \"" + kind + "\"");
        f.order = detail::require_key(fj, "order", where + ".features[]").get<int>();
        fam.features.push_back(f);
    }
    const auto& box = detail::require_key(spec, "box", where);
    if (!box.is_array())
        throw std::invalid_argument(where + ": \"box\" must be an array of [lo,hi] pairs");
    for (const auto& iv : box) {
        auto pair = detail::real_vector(iv, where + ".box[]");
        if (pair.size() != 2)
            throw std::invalid_argument(where + ": each box entry must be [lo,hi]");
        fam.box.push_back({pair[0], pair[1]});
    }
    if (spec.contains("beta")) fam.beta = spec.at("beta").get<double>();
    validate(fam);
    return fam;
}

inline GridDensity build_density(const detail::Json& spec, const GridPtr& grid, double floor,
                                 const std::string& where) {
    std::string kind = detail::require_key(spec, "kind", where).get<std::string>();
    if (kind == "uniform") {
        detail::reject_unknown_keys(spec, {"kind"}, where);
        std::vector<double> ones(static_cast<std::size_t>(grid->m), 1.0);
        return normalize(ones, grid, floor);
    }
    if (kind == "bernstein") {
        detail::reject_unknown_keys(spec, {"kind", "k", "weights"}, where);
        BernsteinSpec bs;
        bs.k = detail::require_key(spec, "k", where).get<int>();
        bs.weights = detail::real_vector(detail::require_key(spec, "weights", where),
                                         where + ".weights");
        return bernstein_density(bs, grid, floor);
    }
    if (kind == "spline") {
        detail::reject_unknown_keys(spec, {"kind", "q", "knots", "theta", "bound"}, where);
        SplineExpSpec ss;
        ss.q = detail::require_key(spec, "q", where).get<int>();
        ss.K = detail::require_key(spec, "knots", where).get<int>();
        ss.theta = detail::real_vector(detail::require_key(spec, "theta", where),
                                       where + ".theta");
        if (spec.contains("bound")) ss.M = spec.at("bound").get<double>();
        return spline_exp_density(ss, grid, floor);
    }
    if (kind == "smooth") {
        detail::reject_unknown_keys(spec, {"kind", "features", "box", "beta", "theta"}, where);
        detail::Json fam_spec = spec;
        fam_spec.erase("kind");
        fam_spec.erase("theta");
        SmoothFamilySpec fam = parse_smooth_family(fam_spec, where);
        auto theta = detail::real_vector(detail::require_key(spec, "theta", where),
                                         where + ".theta");
        return smooth_family_density(fam, theta, grid, floor);
    }
    if (kind == "csv") {
        detail::reject_unknown_keys(spec, {"kind", "path"}, where);
        std::string path = detail::require_key(spec, "path", where).get<std::string>();
        GridDensity d = load_density_csv(path, floor);
        require_same_layout(*d.grid, *grid, where.c_str());
        return d;
    }
    throw std::invalid_argument(where + ": unknown density kind \"" + kind + "\"");
}

// ---------- prior specs ----------

inline AtomicPrior build_prior(const detail::Json& spec, const GridPtr& grid, double floor,
                               const std::string& where) {
    std::string kind = detail::require_key(spec, "kind", where).get<std::string>();
    if (kind == "uniform_atoms") {
        detail::reject_unknown_keys(spec, {"kind", "densities"}, where);
        const auto& ds = detail::require_key(spec, "densities", where);
        if (!ds.is_array() || ds.empty())
            throw std::invalid_argument(where + ": \"densities\" must be a nonempty array");
        std::vector<GridDensity> atoms;
        for (const auto& dj : ds)
            atoms.push_back(build_density(dj, grid, floor, where + ".densities[]"));
        return uniform_atoms(std::move(atoms));
    }
    if (kind == "sieve") {
        detail::reject_unknown_keys(spec, {"kind", "levels", "level_weights", "truncate_at"},
                                    where);
        SieveSpec sv;
        const auto& levels = detail::require_key(spec, "levels", where);
        if (!levels.is_array() || levels.empty())
            throw std::invalid_argument(where + ": \"levels\" must be a nonempty array");
        for (const auto& lvl : levels) {
            if (!lvl.is_array())
                throw std::invalid_argument(where + ": each level must be an array of densities");
            std::vector<GridDensity> atoms;
            for (const auto& dj : lvl)
                atoms.push_back(build_density(dj, grid, floor, where + ".levels[][]"));
            sv.levels.push_back(std::move(atoms));
        }
        sv.level_weights = detail::real_vector(
            detail::require_key(spec, "level_weights", where), where + ".level_weights");
        int truncate_at = static_cast<int>(sv.levels.size());
        if (spec.contains("truncate_at")) truncate_at = spec.at("truncate_at").get<int>();
        return sieve_mixture(sv, truncate_at);
    }
    if (kind == "bernstein") {
        detail::reject_unknown_keys(spec, {"kind", "rho", "kmax", "weight_cells"}, where);
        const auto& rho_spec = detail::require_key(spec, "rho", where);
        std::string rho_kind =
            detail::require_key(rho_spec, "kind", where + ".rho").get<std::string>();
        std::function<double(int)> rho;
        if (rho_kind == "self_power") {
            detail::reject_unknown_keys(rho_spec, {"kind"}, where + ".rho");
            // rho(k) proportional to k^-k, normalized over all k >= 1
            double z = 0.0;
            for (int j = 1;; ++j) {
                double term = std::exp(-static_cast<double>(j) * std::log(static_cast<double>(j)));
                if (term <= 0.0 || term < z * 1e-18) break;
                z += term;
            }
            rho = [z](int k) {
                return std::exp(-static_cast<double>(k) * std::log(static_cast<double>(k))) / z;
            };
        } else if (rho_kind == "geometric") {
            detail::reject_unknown_keys(rho_spec, {"kind", "base"}, where + ".rho");
            double base = detail::require_key(rho_spec, "base", where + ".rho").get<double>();
            if (!(base > 0.0) || !(base < 1.0))
                throw std::invalid_argument(where + ".rho: geometric base must lie in (0,1)");
            rho = [base](int k) { return (1.0 - base) * std::pow(base, k - 1); };
        } else {
            throw std::invalid_argument(where + ".rho: unknown order-weight kind \"" + rho_kind +
                                        "\"");
        }
        int kmax = detail::require_key(spec, "kmax", where).get<int>();
        double weight_cells = detail::require_key(spec, "weight_cells", where).get<double>();
        return bernstein_prior(rho, kmax, weight_cells, grid, floor).prior;
    }
    if (kind == "family_lattice") {
        detail::reject_unknown_keys(spec, {"kind", "family", "points_per_dim"}, where);
        SmoothFamilySpec fam =
            parse_smooth_family(detail::require_key(spec, "family", where), where + ".family");
        int points = detail::require_key(spec, "points_per_dim", where).get<int>();
        return family_lattice_prior(fam, points, grid, floor);
    }
    if (kind == "dir") {
        detail::reject_unknown_keys(spec, {"kind", "path"}, where);
        AtomicPrior p = load_prior(detail::require_key(spec, "path", where).get<std::string>());
        require_same_layout(*p.grid, *grid, where.c_str());
        return p;
    }
    throw std::invalid_argument(where + ": unknown prior kind \"" + kind + "\"");
}

// ---------- rate constants ----------

inline RateConstants parse_constants(const detail::Json& spec) {
    detail::reject_unknown_keys(spec, {"which", "alpha", "c0", "c1", "c2", "c3"}, "constants");
    RateConstants k;
    k.which = theorem_from_name(
        detail::require_key(spec, "which", "constants").get<std::string>());
    if (spec.contains("alpha")) k.alpha = spec.at("alpha").get<double>();
    if (spec.contains("c0")) k.c0 = spec.at("c0").get<double>();
    if (spec.contains("c1")) k.c1 = spec.at("c1").get<double>();
    if (spec.contains("c2")) k.c2 = spec.at("c2").get<double>();
    if (spec.contains("c3")) k.c3 = spec.at("c3").get<double>();
    return k;
}

// ---------- top-level experiment config ----------

struct ExperimentConfig {
    std::string experiment;
    int grid_m = 1024;
    double floor_value = 1e-10;
    std::uint64_t seed = 0;
    std::string output_path;

    detail::Json f0_spec;    // divergence, lemma1, conditions, curve
    detail::Json f1_spec;    // divergence
    detail::Json prior_spec; // entropy, lemma1, conditions, curve

    std::vector<long long> ns;  // lemma1, curve
    double eps = 0.0;           // lemma1, conditions
    double c = 0.0;             // lemma1
    long long reps = 1;         // lemma1, curve
    double mass_target = 0.5;   // curve
    double delta = 0.0;         // entropy
    double alpha = 0.0;         // entropy
    std::vector<int> atoms;     // entropy; empty means all atoms
    bool atoms_given = false;
    std::vector<int> sieve;     // conditions; empty means all atoms
    bool sieve_given = false;
    long long n_single = 0;     // conditions
    RateConstants constants;    // conditions
};

inline ExperimentConfig parse_config(const detail::Json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    std::string experiment =
        detail::require_key(j, "experiment", "config").get<std::string>();

    std::set<std::string> allowed = {"experiment", "grid_m", "floor", "seed", "output_path"};
    if (experiment == "divergence") {
        allowed.insert({"f0", "f1"});
    } else if (experiment == "entropy") {
        allowed.insert({"prior", "delta", "alpha", "atoms"});
    } else if (experiment == "lemma1") {
        allowed.insert({"prior", "f0", "ns", "eps", "c", "reps"});
    } else if (experiment == "conditions") {
        allowed.insert({"prior", "f0", "sieve", "eps", "n", "constants"});
    } else if (experiment == "curve") {
        allowed.insert({"prior", "f0", "ns", "mass_target", "reps"});
    } else {
        throw std::invalid_argument("config: unknown experiment \"" + experiment + "\"");
    }
    detail::reject_unknown_keys(j, allowed, "config");

    ExperimentConfig cfg;
    cfg.experiment = experiment;
    if (j.contains("grid_m")) cfg.grid_m = j.at("grid_m").get<int>();
    if (j.contains("floor")) cfg.floor_value = j.at("floor").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_path")) cfg.output_path = j.at("output_path").get<std::string>();

    if (j.contains("f0")) cfg.f0_spec = j.at("f0");
    if (j.contains("f1")) cfg.f1_spec = j.at("f1");
    if (j.contains("prior")) cfg.prior_spec = j.at("prior");

    if (j.contains("ns")) {
        const auto& ns = j.at("ns");
        if (!ns.is_array() || ns.empty())
            throw std::invalid_argument("config: \"ns\" must be a nonempty array of integers");
        for (const auto& v : ns) {
            if (!v.is_number_integer())
                throw std::invalid_argument("config: \"ns\" must contain only integers");
            cfg.ns.push_back(v.get<long long>());
        }
    }
    if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
    if (j.contains("c")) cfg.c = j.at("c").get<double>();
    if (j.contains("reps")) cfg.reps = j.at("reps").get<long long>();
    if (j.contains("mass_target")) cfg.mass_target = j.at("mass_target").get<double>();
    if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
    if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
    if (j.contains("atoms")) {
        cfg.atoms = detail::int_vector(j.at("atoms"), "config: \"atoms\"");
        cfg.atoms_given = true;
    }
    if (j.contains("sieve")) {
        cfg.sieve = detail::int_vector(j.at("sieve"), "config: \"sieve\"");
        cfg.sieve_given = true;
    }
    if (j.contains("n")) cfg.n_single = j.at("n").get<long long>();
    if (j.contains("constants")) cfg.constants = parse_constants(j.at("constants"));

    // required pieces per experiment
    auto need = [&](const char* key, bool present) {
        if (!present)
            throw std::invalid_argument("config: experiment \"" + experiment +
                                        "\" requires key \"" + key + "\"");
    };
    if (experiment == "divergence") {
        need("f0", !cfg.f0_spec.is_null());
        need("f1", !cfg.f1_spec.is_null());
    } else if (experiment == "entropy") {
        need("prior", !cfg.prior_spec.is_null());
        need("delta", j.contains("delta"));
        need("alpha", j.contains("alpha"));
    } else if (experiment == "lemma1") {
        need("prior", !cfg.prior_spec.is_null());
        need("f0", !cfg.f0_spec.is_null());
        need("ns", !cfg.ns.empty());
        need("eps", j.contains("eps"));
        need("c", j.contains("c"));
        need("reps", j.contains("reps"));
    } else if (experiment == "conditions") {
        need("prior", !cfg.prior_spec.is_null());
        need("f0", !cfg.f0_spec.is_null());
        need("eps", j.contains("eps"));
        need("n", j.contains("n"));
        need("constants", j.contains("constants"));
    } else if (experiment == "curve") {
        need("prior", !cfg.prior_spec.is_null());
        need("f0", !cfg.f0_spec.is_null());
        need("ns", !cfg.ns.empty());
        need("reps", j.contains("reps"));
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open())
        throw std::invalid_argument("cannot open config file " + path);
    detail::Json j;
    try {
        j = detail::Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

} // namespace ratelab
