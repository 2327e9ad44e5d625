#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ratelab/config.hpp"
#include "ratelab/experiments.hpp"
#include "ratelab/records.hpp"

namespace ratelab {

// Executes one configured experiment, appending one JSONL record per
// replication. Replication k uses seed seed_base + k, so a run interrupted
// after any record can resume: existing intact records are counted and only
// the missing ones are recomputed, producing a file byte-identical to an
// uninterrupted run.

namespace detail {

struct RecordSink {
    std::string path;
    std::ofstream out;

    explicit RecordSink(const std::string& p) : path(p) {
        out.open(p, std::ios::binary | std::ios::app);
        if (!out.is_open())
            throw std::runtime_error("cannot open output file " + p + " for append");
    }
    void append(const ExperimentRecord& rec, std::size_t index) {
        out << record_to_line(rec) << '\n';
        out.flush();
        if (!out)
            throw std::runtime_error("write failed on " + path + " at record " +
                                     std::to_string(index));
    }
};

// Loads the intact prefix, truncates any dirty tail, and checks that what
// remains belongs to this experiment with the expected seed schedule.
inline std::vector<ExperimentRecord> prepare_resume(const std::string& path,
                                                    const std::string& experiment) {
    RecordFile file = load_records(path);
    if (!file.clean)
        std::filesystem::resize_file(path, file.valid_bytes);
    for (std::size_t i = 0; i < file.records.size(); ++i)
        if (file.records[i].experiment != experiment)
            throw std::invalid_argument("existing record " + std::to_string(i) + " in " + path +
                                        " belongs to experiment \"" +
                                        file.records[i].experiment + "\", not \"" + experiment +
                                        "\"");
    return std::move(file.records);
}

} // namespace detail

inline std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.output_path.empty())
        throw std::invalid_argument("config: output_path is required (or pass --out)");
    if (cfg.experiment == "entropy")
        throw std::invalid_argument(
            "entropy produces a covering report, not replication records");

    GridPtr grid = make_grid(cfg.grid_m);
    auto records = detail::prepare_resume(cfg.output_path, cfg.experiment);
    detail::RecordSink sink(cfg.output_path);
    auto emit = [&](ExperimentRecord rec) {
        sink.append(rec, records.size());
        records.push_back(std::move(rec));
    };

    if (cfg.experiment == "divergence") {
        GridDensity f0 = build_density(cfg.f0_spec, grid, cfg.floor_value, "config.f0");
        GridDensity f1 = build_density(cfg.f1_spec, grid, cfg.floor_value, "config.f1");
        if (records.size() > 1)
            throw std::invalid_argument("existing file has more records than this "
                                        "single-record experiment produces");
        if (records.empty()) {
            DivergenceReport rep = divergence_report(f0, f1);
            ExperimentRecord rec;
            rec.seed = cfg.seed;
            rec.n = 0;
            rec.eps = 0.0;
            rec.experiment = "divergence";
            rec.quantities = {{"hellinger", rep.hellinger}, {"hstar", rep.hstar},
                              {"kl", rep.kl},               {"v", rep.v},
                              {"sup_ratio", rep.sup_ratio}, {"clamped", rep.clamped ? 1.0 : 0.0}};
            emit(std::move(rec));
        }
        return records;
    }

    if (cfg.experiment == "lemma1") {
        GridDensity f0 = build_density(cfg.f0_spec, grid, cfg.floor_value, "config.f0");
        auto prior = std::make_shared<const AtomicPrior>(
            build_prior(cfg.prior_spec, grid, cfg.floor_value, "config.prior"));
        if (cfg.reps < 1) throw std::invalid_argument("config: reps must be positive");
        if (!(cfg.eps > 0.0)) throw std::invalid_argument("config: eps must be positive");
        if (!(cfg.c > 0.0)) throw std::invalid_argument("config: c must be positive");
        double w_mass = wstar_ball_mass(*prior, f0, cfg.eps);
        std::size_t total = cfg.ns.size() * static_cast<std::size_t>(cfg.reps);
        if (records.size() > total)
            throw std::invalid_argument("existing file has more records than this config "
                                        "produces");
        for (std::size_t k = records.size(); k < total; ++k) {
            long long n = cfg.ns[k / static_cast<std::size_t>(cfg.reps)];
            auto rep_idx = static_cast<std::uint64_t>(k % static_cast<std::size_t>(cfg.reps));
            if (n < 1) throw std::invalid_argument("config: lemma1 sample sizes must be positive");
            double ne2 = static_cast<double>(n) * cfg.eps * cfg.eps;
            double bound = std::exp(-ne2 * cfg.c);
            bool vacuous = w_mass <= 0.0;
            double threshold = vacuous ? -std::numeric_limits<double>::infinity()
                                       : -ne2 * (3.0 + 2.0 * cfg.c) + std::log(w_mass);
            PosteriorState st = update(make_posterior(prior),
                                       sample_iid(f0, n, cfg.seed + rep_idx));
            double log_mlr = marginal_likelihood_ratio(st, f0);
            ExperimentRecord rec;
            rec.seed = cfg.seed + rep_idx;
            rec.n = n;
            rec.eps = cfg.eps;
            rec.experiment = "lemma1";
            rec.quantities = {{"bound", bound},
                              {"c", cfg.c},
                              {"event", log_mlr <= threshold ? 1.0 : 0.0},
                              {"log_mlr", log_mlr},
                              {"prior_mass_w", w_mass},
                              {"threshold", threshold},
                              {"vacuous", vacuous ? 1.0 : 0.0}};
            emit(std::move(rec));
        }
        return records;
    }

    if (cfg.experiment == "conditions") {
        GridDensity f0 = build_density(cfg.f0_spec, grid, cfg.floor_value, "config.f0");
        AtomicPrior prior = build_prior(cfg.prior_spec, grid, cfg.floor_value, "config.prior");
        std::vector<int> sieve = cfg.sieve;
        if (!cfg.sieve_given) {
            sieve.resize(static_cast<std::size_t>(prior.size()));
            for (int i = 0; i < prior.size(); ++i) sieve[static_cast<std::size_t>(i)] = i;
        }
        if (records.size() > 1)
            throw std::invalid_argument("existing file has more records than this "
                                        "single-record experiment produces");
        if (records.empty()) {
            ConditionReport rep =
                check_conditions(prior, f0, sieve, cfg.eps, cfg.constants, cfg.n_single);
            ExperimentRecord rec;
            rec.seed = cfg.seed;
            rec.n = rep.n;
            rec.eps = rep.eps;
            rec.experiment = "conditions";
            rec.quantities["multiplier"] = rep.multiplier;
            rec.quantities["all_hold"] = rep.all_hold ? 1.0 : 0.0;
            rec.quantities["j_value"] = rep.j_value;
            rec.quantities["j_exact"] = rep.j_method == SolveMethod::exact ? 1.0 : 0.0;
            for (const auto& e : rep.entries) {
                rec.quantities[e.name + "_lhs"] = e.lhs;
                rec.quantities[e.name + "_rhs"] = e.rhs;
                rec.quantities[e.name + "_holds"] = e.holds ? 1.0 : 0.0;
            }
            for (const auto& s : rep.shells) {
                std::string tag = "shell" + std::to_string(s.j);
                rec.quantities[tag + "_atoms"] = static_cast<double>(s.atom_count);
                rec.quantities[tag + "_value"] = s.j_value;
                rec.quantities[tag + "_bound"] = s.bound;
                rec.quantities[tag + "_holds"] = s.holds ? 1.0 : 0.0;
                rec.quantities[tag + "_exact"] = s.method == SolveMethod::exact ? 1.0 : 0.0;
            }
            emit(std::move(rec));
        }
        return records;
    }

    if (cfg.experiment == "curve") {
        GridDensity f0 = build_density(cfg.f0_spec, grid, cfg.floor_value, "config.f0");
        AtomicPrior prior = build_prior(cfg.prior_spec, grid, cfg.floor_value, "config.prior");
        if (cfg.reps < 1) throw std::invalid_argument("config: reps must be positive");
        auto total = static_cast<std::size_t>(cfg.reps);
        if (records.size() > total)
            throw std::invalid_argument("existing file has more records than this config "
                                        "produces");
        auto done = static_cast<std::uint64_t>(records.size());
        if (records.size() < total) {
            CurveResult res = contraction_curve(prior, f0, cfg.ns, cfg.mass_target,
                                                cfg.reps - static_cast<long long>(done),
                                                cfg.seed + done);
            for (std::size_t r = 0; r < res.radii.size(); ++r) {
                ExperimentRecord rec;
                rec.seed = cfg.seed + done + static_cast<std::uint64_t>(r);
                rec.n = cfg.ns.back();
                rec.eps = 0.0;
                rec.experiment = "curve";
                rec.quantities["mass_target"] = cfg.mass_target;
                for (std::size_t i = 0; i < cfg.ns.size(); ++i)
                    rec.quantities["radius@" + std::to_string(cfg.ns[i])] = res.radii[r][i];
                emit(std::move(rec));
            }
        }
        return records;
    }

    throw std::invalid_argument("config: unknown experiment \"" + cfg.experiment + "\"");
}

// ---------- summary CSV ----------

// curve records aggregate to rows "n,reps,median_radius,q25,q75" (n
// ascending); lemma1 records to "n,eps,c,empirical_prob,bound,pass" grouped
// by configuration. Other experiments have no aggregate form.
inline std::string report_csv(const std::vector<ExperimentRecord>& records) {
    if (records.empty()) throw std::invalid_argument("report: no records to aggregate");
    const std::string& experiment = records.front().experiment;
    for (const auto& r : records)
        if (r.experiment != experiment)
            throw std::invalid_argument("report: mixed experiments in one file (\"" +
                                        experiment + "\" and \"" + r.experiment + "\")");

    std::string csv;
    if (experiment == "curve") {
        std::vector<long long> ns;
        for (const auto& [key, value] : records.front().quantities) {
            (void)value;
            if (key.rfind("radius@", 0) == 0) ns.push_back(std::stoll(key.substr(7)));
        }
        std::sort(ns.begin(), ns.end());
        if (ns.empty()) throw std::invalid_argument("report: curve records carry no radii");
        csv = "n,reps,median_radius,q25,q75\n";
        for (long long n : ns) {
            std::string key = "radius@" + std::to_string(n);
            std::vector<double> column;
            for (const auto& r : records) {
                auto it = r.quantities.find(key);
                if (it == r.quantities.end())
                    throw std::invalid_argument("report: record missing quantity " + key);
                column.push_back(it->second);
            }
            std::sort(column.begin(), column.end());
            csv += std::to_string(n) + "," + std::to_string(records.size()) + "," +
                   format_double(detail::quantile_sorted(column, 0.5)) + "," +
                   format_double(detail::quantile_sorted(column, 0.25)) + "," +
                   format_double(detail::quantile_sorted(column, 0.75)) + "\n";
        }
        return csv;
    }
    if (experiment == "lemma1") {
        std::map<std::tuple<long long, double, double>, std::vector<const ExperimentRecord*>>
            groups;
        for (const auto& r : records) {
            auto it = r.quantities.find("c");
            if (it == r.quantities.end())
                throw std::invalid_argument("report: lemma1 record missing quantity c");
            groups[{r.n, r.eps, it->second}].push_back(&r);
        }
        csv = "n,eps,c,empirical_prob,bound,pass\n";
        for (const auto& [key, group] : groups) {
            auto [n, eps, c] = key;
            CompensatedSum events;
            double bound = group.front()->quantities.at("bound");
            for (const ExperimentRecord* r : group) events.add(r->quantities.at("event"));
            double empirical = events.value() / static_cast<double>(group.size());
            double sigma = std::sqrt(bound * (1.0 - bound) / static_cast<double>(group.size()));
            bool pass = empirical <= bound + 3.0 * sigma;
            csv += std::to_string(n) + "," + format_double(eps) + "," + format_double(c) + "," +
                   format_double(empirical) + "," + format_double(bound) + "," +
                   (pass ? "1" : "0") + "\n";
        }
        return csv;
    }
    throw std::invalid_argument("report: experiment \"" + experiment +
                                "\" has no aggregate summary; curve and lemma1 do");
}

} // namespace ratelab
