#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ratelab/records.hpp"
#include "ratelab/runner.hpp"

using namespace ratelab;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.is_open());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    REQUIRE(out.is_open());
    out << bytes;
}

ExperimentRecord sample_record() {
    ExperimentRecord rec;
    rec.seed = 42;
    rec.n = 100;
    rec.eps = 0.25;
    rec.experiment = "lemma1";
    rec.quantities = {{"bound", 0.5}, {"event", 1.0}, {"threshold", -3.25}};
    return rec;
}

} // namespace

TEST_CASE("non-finite reals encode as strings and decode back") {
    CHECK(encode_real(1.5).is_number());
    CHECK(encode_real(kInf) == "inf");
    CHECK(encode_real(-kInf) == "-inf");
    CHECK(encode_real(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(decode_real(nlohmann::ordered_json(2.5)) == 2.5);
    CHECK(decode_real(nlohmann::ordered_json("inf")) == kInf);
    CHECK(decode_real(nlohmann::ordered_json("-inf")) == -kInf);
    CHECK(std::isnan(decode_real(nlohmann::ordered_json("nan"))));
    CHECK_THROWS_WITH(decode_real(nlohmann::ordered_json("infinity")),
                      ContainsSubstring("neither a number nor inf/-inf/nan"));
    CHECK_THROWS_AS(decode_real(nlohmann::ordered_json(true)), std::invalid_argument);
}

TEST_CASE("records round-trip through JSON including non-finite quantities") {
    ExperimentRecord rec = sample_record();
    rec.quantities["threshold"] = -kInf;
    rec.quantities["j"] = std::numeric_limits<double>::quiet_NaN();

    ExperimentRecord back = record_from_json(record_to_json(rec));
    CHECK(back.seed == rec.seed);
    CHECK(back.n == rec.n);
    CHECK(back.eps == rec.eps);
    CHECK(back.experiment == rec.experiment);
    REQUIRE(back.quantities.size() == 4);
    CHECK(back.quantities.at("bound") == 0.5);
    CHECK(back.quantities.at("threshold") == -kInf);
    CHECK(std::isnan(back.quantities.at("j")));

    // one line per record, newline added by the writer
    std::string line = record_to_line(rec);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(line.rfind("{\"seed\":42,", 0) == 0);
}

TEST_CASE("records reject unknown fields and non-objects") {
    auto j = record_to_json(sample_record());
    j["extra"] = 1;
    CHECK_THROWS_WITH(record_from_json(j), ContainsSubstring("unknown field \"extra\""));
    CHECK_THROWS_WITH(record_from_json(nlohmann::ordered_json::array()),
                      ContainsSubstring("not a JSON object"));
}

TEST_CASE("loading records keeps the intact newline-terminated prefix") {
    fs::path path = fs::temp_directory_path() / "ratelab_records_prefix.jsonl";
    std::string l1 = record_to_line(sample_record());
    ExperimentRecord r2 = sample_record();
    r2.seed = 43;
    std::string l2 = record_to_line(r2);

    SECTION("absent file") {
        fs::remove(path);
        RecordFile f = load_records(path.string());
        CHECK(f.records.empty());
        CHECK(f.valid_bytes == 0);
        CHECK(f.clean);
    }
    SECTION("fully intact file") {
        spit(path, l1 + "\n" + l2 + "\n");
        RecordFile f = load_records(path.string());
        REQUIRE(f.records.size() == 2);
        CHECK(f.records[1].seed == 43);
        CHECK(f.valid_bytes == l1.size() + l2.size() + 2);
        CHECK(f.clean);
    }
    SECTION("unterminated tail") {
        spit(path, l1 + "\n" + l2.substr(0, l2.size() / 2));
        RecordFile f = load_records(path.string());
        REQUIRE(f.records.size() == 1);
        CHECK(f.valid_bytes == l1.size() + 1);
        CHECK_FALSE(f.clean);
    }
    SECTION("garbled middle line hides everything after it") {
        spit(path, l1 + "\nnot json\n" + l2 + "\n");
        RecordFile f = load_records(path.string());
        REQUIRE(f.records.size() == 1);
        CHECK(f.valid_bytes == l1.size() + 1);
        CHECK_FALSE(f.clean);
    }
    SECTION("a line with a foreign field counts as dirty") {
        spit(path, l1 + "\n{\"seed\":1,\"bogus\":2}\n");
        RecordFile f = load_records(path.string());
        REQUIRE(f.records.size() == 1);
        CHECK_FALSE(f.clean);
    }
    fs::remove(path);
}

TEST_CASE("covering reports serialize with atom labels") {
    auto g = make_grid(32);
    std::vector<GridDensity> atoms{testutil::half_mix(g, 0.5), testutil::half_mix(g, 0.52),
                                   testutil::half_mix(g, 0.9)};
    AtomicPrior p = make_atomic_prior(atoms, {0.5, 0.25, 0.25}, {"a", "b", "c"});
    CoveringReport rep = hausdorff_entropy(p, {0, 1, 2}, 0.1, 0.5);

    auto j = covering_report_to_json(rep, p);
    CHECK(j.at("delta") == 0.1);
    CHECK(j.at("alpha") == 0.5);
    CHECK(j.at("method") == "exact");
    CHECK(j.at("optimal") == true);
    CHECK(j.at("covering_number").get<long long>() == rep.covering_number);
    CHECK(j.at("j_value").get<double>() == Approx(rep.j_value));
    // blocks name atoms by label; the near pair shares a block
    REQUIRE(j.at("blocks").size() == 2);
    std::size_t named = 0;
    for (const auto& b : j.at("blocks")) {
        CHECK(b.at("center").is_string());
        for (const auto& a : b.at("atoms")) {
            CHECK((a == "a" || a == "b" || a == "c"));
            ++named;
        }
    }
    CHECK(named == 3);

    CoveringReport bogus = rep;
    bogus.blocks[0].atoms.push_back(7);
    CHECK_THROWS_WITH(covering_report_to_json(bogus, p),
                      ContainsSubstring("atom 7 outside the prior"));
}

TEST_CASE("curve records aggregate to quantile rows per sample size") {
    std::vector<ExperimentRecord> recs;
    // dyadic radii interpolate exactly, keeping the expected text unambiguous
    std::vector<double> r10{0.5, 0.25, 0.375};
    std::vector<double> r100{0.125, 0.0625, 0.0};
    for (int i = 0; i < 3; ++i) {
        ExperimentRecord rec;
        rec.seed = static_cast<std::uint64_t>(i);
        rec.n = 100;
        rec.experiment = "curve";
        rec.quantities = {{"mass_target", 0.5},
                          {"radius@100", r100[static_cast<std::size_t>(i)]},
                          {"radius@10", r10[static_cast<std::size_t>(i)]}};
        recs.push_back(rec);
    }
    std::string csv = report_csv(recs);
    std::string expected = "n,reps,median_radius,q25,q75\n"
                           "10,3,0.375,0.3125,0.4375\n"
                           "100,3,0.0625,0.03125,0.09375\n";
    CHECK(csv == expected);
}

TEST_CASE("evidence records aggregate per configuration with a tolerance band") {
    std::vector<ExperimentRecord> recs;
    auto add = [&](long long n, double c, double event, double bound) {
        ExperimentRecord rec;
        rec.n = n;
        rec.eps = 0.5;
        rec.experiment = "lemma1";
        rec.quantities = {{"bound", bound}, {"c", c}, {"event", event}};
        recs.push_back(rec);
    };
    // group one: all quiet, trivially inside the band
    for (int i = 0; i < 4; ++i) add(10, 1.0, 0.0, 0.2);
    // group two: every replication crossed while the bound says 1e-3: fails
    for (int i = 0; i < 4; ++i) add(20, 2.0, 1.0, 1e-3);

    std::string csv = report_csv(recs);
    std::string expected = "n,eps,c,empirical_prob,bound,pass\n"
                           "10,0.5,1,0,0.2,1\n"
                           "20,0.5,2,1,0.001,0\n";
    CHECK(csv == expected);
}

TEST_CASE("summary rejects empty, mixed, and unaggregatable inputs") {
    CHECK_THROWS_WITH(report_csv({}), ContainsSubstring("no records"));

    ExperimentRecord a = sample_record();
    ExperimentRecord b = sample_record();
    b.experiment = "curve";
    CHECK_THROWS_WITH(report_csv({a, b}), ContainsSubstring("mixed experiments"));

    ExperimentRecord d;
    d.experiment = "divergence";
    CHECK_THROWS_WITH(report_csv({d}), ContainsSubstring("no aggregate summary"));

    ExperimentRecord c1;
    c1.experiment = "curve";
    c1.quantities = {{"mass_target", 0.5}, {"radius@10", 0.1}};
    ExperimentRecord c2 = c1;
    c2.quantities.erase("radius@10");
    c2.quantities["radius@20"] = 0.1;
    CHECK_THROWS_WITH(report_csv({c1, c2}), ContainsSubstring("missing quantity radius@10"));

    ExperimentRecord no_radius;
    no_radius.experiment = "curve";
    no_radius.quantities = {{"mass_target", 0.5}};
    CHECK_THROWS_WITH(report_csv({no_radius}), ContainsSubstring("carry no radii"));

    ExperimentRecord no_c;
    no_c.experiment = "lemma1";
    no_c.quantities = {{"bound", 0.5}, {"event", 0.0}};
    CHECK_THROWS_WITH(report_csv({no_c}), ContainsSubstring("missing quantity c"));
}

namespace {

nlohmann::ordered_json divergence_config(const fs::path& out) {
    return nlohmann::ordered_json{
        {"experiment", "divergence"},
        {"grid_m", 64},
        {"seed", 7},
        {"output_path", out.string()},
        {"f0", {{"kind", "uniform"}}},
        {"f1", {{"kind", "bernstein"}, {"k", 2}, {"weights", {0.25, 0.75}}}}};
}

nlohmann::ordered_json lemma1_config(const fs::path& out) {
    nlohmann::ordered_json densities = nlohmann::ordered_json::array();
    densities.push_back({{"kind", "uniform"}});
    densities.push_back({{"kind", "bernstein"}, {"k", 2}, {"weights", {0.3, 0.7}}});
    return nlohmann::ordered_json{{"experiment", "lemma1"},
                                  {"grid_m", 64},
                                  {"seed", 11},
                                  {"output_path", out.string()},
                                  {"prior", {{"kind", "uniform_atoms"}, {"densities", densities}}},
                                  {"f0", {{"kind", "uniform"}}},
                                  {"ns", {5, 9}},
                                  {"eps", 0.3},
                                  {"c", 1.0},
                                  {"reps", 3}};
}

} // namespace

TEST_CASE("runs are byte-stable and resume from a truncated file") {
    fs::path dir = fs::temp_directory_path() / "ratelab_runner_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    SECTION("single-record experiment does not duplicate on rerun") {
        fs::path out = dir / "divergence.jsonl";
        auto cfg = parse_config(divergence_config(out));
        auto first = run_experiment(cfg);
        REQUIRE(first.size() == 1);
        CHECK(first[0].quantities.at("hellinger") > 0.0);
        std::string bytes = slurp(out);
        auto second = run_experiment(cfg);
        CHECK(second.size() == 1);
        CHECK(slurp(out) == bytes);
    }

    SECTION("interrupted multi-record run resumes to identical bytes") {
        fs::path out = dir / "lemma1.jsonl";
        auto cfg = parse_config(lemma1_config(out));
        auto full = run_experiment(cfg);
        REQUIRE(full.size() == 6); // two sample sizes, three replications each
        std::string bytes = slurp(out);

        // chop mid-record: the dirty tail must be truncated and recomputed
        spit(out, bytes.substr(0, bytes.size() / 2));
        auto resumed = run_experiment(cfg);
        CHECK(resumed.size() == 6);
        CHECK(slurp(out) == bytes);

        // replication seeds restart per sample size, so record k pairs with
        // seed seed + (k mod reps)
        CHECK(full[0].seed == 11);
        CHECK(full[4].seed == 12);
        CHECK(full[3].n == 9);
    }

    SECTION("existing file from another experiment is refused") {
        fs::path out = dir / "clash.jsonl";
        ExperimentRecord alien;
        alien.experiment = "curve";
        spit(out, record_to_line(alien) + "\n");
        auto cfg = parse_config(divergence_config(out));
        CHECK_THROWS_WITH(run_experiment(cfg),
                          ContainsSubstring("belongs to experiment \"curve\""));
    }

    SECTION("overfull file is refused rather than silently kept") {
        fs::path out = dir / "overfull.jsonl";
        auto cfg = parse_config(divergence_config(out));
        run_experiment(cfg);
        std::string bytes = slurp(out);
        spit(out, bytes + bytes); // two records where one belongs
        CHECK_THROWS_WITH(run_experiment(cfg), ContainsSubstring("more records"));
    }

    SECTION("entropy configs have no replication records") {
        ExperimentConfig cfg;
        cfg.experiment = "entropy";
        cfg.output_path = (dir / "e.jsonl").string();
        CHECK_THROWS_WITH(run_experiment(cfg), ContainsSubstring("covering report"));
    }

    SECTION("an output path is mandatory") {
        ExperimentConfig cfg;
        cfg.experiment = "divergence";
        CHECK_THROWS_WITH(run_experiment(cfg), ContainsSubstring("output_path is required"));
    }

    fs::remove_all(dir);
}
