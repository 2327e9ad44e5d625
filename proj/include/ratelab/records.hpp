#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ratelab/entropy.hpp"
#include "ratelab/priors.hpp"

namespace ratelab {

// One JSONL line per replication. Records are append-only and byte-stable:
// rerunning with the same config and seed reproduces the file exactly, and a
// run interrupted mid-write can be resumed by re-reading the intact prefix.

struct ExperimentRecord {
    std::uint64_t seed = 0;
    long long n = 0;
    double eps = 0.0;
    std::string experiment;
    std::map<std::string, double> quantities; // sorted keys keep output stable
};

// JSON has no literal infinities; real-valued fields use the strings
// "inf" / "-inf" / "nan" for the non-finite cases.
inline nlohmann::ordered_json encode_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline double decode_real(const nlohmann::ordered_json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string& s = j.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw std::invalid_argument("record field is neither a number nor inf/-inf/nan");
}

inline nlohmann::ordered_json record_to_json(const ExperimentRecord& rec) {
    nlohmann::ordered_json j;
    j["seed"] = rec.seed;
    j["n"] = rec.n;
    j["eps"] = encode_real(rec.eps);
    j["experiment"] = rec.experiment;
    nlohmann::ordered_json q = nlohmann::ordered_json::object();
    for (const auto& [k, v] : rec.quantities) q[k] = encode_real(v);
    j["quantities"] = q;
    return j;
}

inline ExperimentRecord record_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw std::invalid_argument("record line is not a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "seed" && key != "n" && key != "eps" && key != "experiment" &&
            key != "quantities")
            throw std::invalid_argument("record has unknown field \"" + key + "\"");
    }
    ExperimentRecord rec;
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.n = j.at("n").get<long long>();
    rec.eps = decode_real(j.at("eps"));
    rec.experiment = j.at("experiment").get<std::string>();
    for (const auto& [k, v] : j.at("quantities").items())
        rec.quantities[k] = decode_real(v);
    return rec;
}

inline std::string record_to_line(const ExperimentRecord& rec) {
    return record_to_json(rec).dump();
}

struct RecordFile {
    std::vector<ExperimentRecord> records;
    std::uintmax_t valid_bytes = 0; // prefix length holding intact records
    bool clean = true;              // false when a partial/garbled tail exists
};

// Reads the intact prefix of a JSONL file. A record counts only if its line
// is newline-terminated and parses; everything from the first bad line on is
// reported as a dirty tail for the caller to truncate before appending.
inline RecordFile load_records(const std::string& path) {
    RecordFile out;
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) return out; // absent file: nothing recorded yet
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    while (pos < data.size()) {
        std::size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) break; // unterminated tail
        std::string line = data.substr(pos, nl - pos);
        try {
            out.records.push_back(record_from_json(
                nlohmann::ordered_json::parse(line, nullptr, true)));
        } catch (const std::exception&) {
            break;
        }
        pos = nl + 1;
    }
    out.valid_bytes = pos;
    out.clean = pos == data.size();
    return out;
}

// Covering/partition reports serialize with atom labels, not indices, so the
// file stands alone without the prior object.
inline nlohmann::ordered_json covering_report_to_json(const CoveringReport& rep,
                                                      const AtomicPrior& prior) {
    auto label_of = [&](int idx) -> std::string {
        if (idx < 0 || idx >= prior.size())
            throw std::invalid_argument("covering_report_to_json: block references atom " +
                                        std::to_string(idx) + " outside the prior");
        return prior.labels[static_cast<std::size_t>(idx)];
    };
    nlohmann::ordered_json j;
    j["delta"] = encode_real(rep.delta);
    j["alpha"] = encode_real(rep.alpha);
    j["covering_number"] = rep.covering_number;
    j["j_value"] = encode_real(rep.j_value);
    j["method"] = rep.method == SolveMethod::exact ? "exact" : "greedy";
    j["optimal"] = rep.optimal;
    nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
    for (const auto& b : rep.blocks) {
        nlohmann::ordered_json jb;
        jb["center"] = label_of(b.center);
        nlohmann::ordered_json atoms = nlohmann::ordered_json::array();
        for (int a : b.atoms) atoms.push_back(label_of(a));
        jb["atoms"] = atoms;
        blocks.push_back(jb);
    }
    j["blocks"] = blocks;
    return j;
}

} // namespace ratelab
