#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <vector>

#include "helpers.hpp"
#include "ratelab/divergences.hpp"
#include "ratelab/families.hpp"
#include "ratelab/grid.hpp"
#include "ratelab/priors.hpp"
#include "ratelab/rng.hpp"

using namespace ratelab;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

GridDensity flat_density(const GridPtr& g) {
    return normalize(std::vector<double>(static_cast<std::size_t>(g->m), 1.0), g, 0.0);
}

double weight_sum(const AtomicPrior& prior) {
    CompensatedSum s;
    for (double w : prior.weights) s.add(w);
    return s.value();
}

} // namespace

TEST_CASE("uniform_atoms assigns equal weights") {
    auto g = make_grid(32);
    AtomicPrior one = uniform_atoms({flat_density(g)});
    REQUIRE(one.size() == 1);
    CHECK(one.weights[0] == 1.0);
    CHECK(one.labels[0] == "atom=0");

    AtomicPrior four = uniform_atoms({flat_density(g), flat_density(g), flat_density(g),
                                      flat_density(g)});
    for (double w : four.weights) CHECK(w == 0.25);
    CHECK(weight_sum(four) == Approx(1.0).margin(1e-10));

    // duplicates are allowed and keep uniform weights
    AtomicPrior dup = uniform_atoms({flat_density(g), flat_density(g)});
    CHECK(dup.weights[0] == 0.5);

    CHECK_THROWS_WITH(uniform_atoms({}), ContainsSubstring("empty"));
}

TEST_CASE("make_atomic_prior renormalizes and validates") {
    auto g = make_grid(16);
    std::vector<GridDensity> atoms{flat_density(g), flat_density(g), flat_density(g)};
    AtomicPrior p = make_atomic_prior(atoms, {2.0, 3.0, 5.0}, {"a", "b", "c"}, 0.125);
    CHECK(p.weights[0] == Approx(0.2).margin(1e-15));
    CHECK(p.weights[1] == Approx(0.3).margin(1e-15));
    CHECK(p.weights[2] == Approx(0.5).margin(1e-15));
    CHECK(p.labels[1] == "b");
    CHECK(p.tail_mass == 0.125);

    CHECK_THROWS_WITH(make_atomic_prior(atoms, {1.0, 0.0, 1.0}),
                      ContainsSubstring("strictly positive"));
    CHECK_THROWS_WITH(make_atomic_prior(atoms, {1.0, 1.0}),
                      ContainsSubstring("2 weights for 3 atoms"));
    CHECK_THROWS_WITH(make_atomic_prior(atoms, {1.0, 1.0, 1.0}, {"x"}),
                      ContainsSubstring("label count"));
    CHECK_THROWS_AS(make_atomic_prior(atoms, {1.0, 1.0, 1.0}, {}, 1.0),
                    std::invalid_argument);

    auto g2 = make_grid(8);
    std::vector<GridDensity> mixed{flat_density(g), flat_density(g2)};
    CHECK_THROWS_AS(make_atomic_prior(mixed, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("single-level sieve equals the uniform prior on its atoms") {
    auto g = make_grid(32);
    Rng rng(11);
    SieveSpec spec;
    spec.levels = {{testutil::random_positive_density(g, rng),
                    testutil::random_positive_density(g, rng)}};
    spec.level_weights = {1.0};
    AtomicPrior sieve = sieve_mixture(spec, 1);
    AtomicPrior flat = uniform_atoms(spec.levels[0]);
    REQUIRE(sieve.size() == flat.size());
    for (int i = 0; i < sieve.size(); ++i) {
        CHECK(sieve.weights[static_cast<std::size_t>(i)] ==
              flat.weights[static_cast<std::size_t>(i)]);
        CHECK(sieve.atoms[static_cast<std::size_t>(i)].values ==
              flat.atoms[static_cast<std::size_t>(i)].values);
    }
    CHECK(sieve.tail_mass == 0.0);
    CHECK(sieve.labels[0] == "level=1,atom=0");
}

TEST_CASE("two-level sieve splits level mass uniformly within levels") {
    auto g = make_grid(32);
    SieveSpec spec;
    spec.levels = {{flat_density(g)}, {flat_density(g), flat_density(g)}};
    spec.level_weights = {0.5, 0.5};
    AtomicPrior p = sieve_mixture(spec, 2);
    REQUIRE(p.size() == 3);
    CHECK(p.weights[0] == Approx(0.5).margin(1e-15));
    CHECK(p.weights[1] == Approx(0.25).margin(1e-15));
    CHECK(p.weights[2] == Approx(0.25).margin(1e-15));
    CHECK(p.labels[2] == "level=2,atom=1");
}

TEST_CASE("sieve truncation reports the discarded geometric tail") {
    auto g = make_grid(16);
    SieveSpec spec;
    for (int j = 1; j <= 12; ++j) {
        spec.levels.push_back({flat_density(g)});
        spec.level_weights.push_back(std::pow(2.0, -j));
    }
    AtomicPrior p = sieve_mixture(spec, 10);
    REQUIRE(p.size() == 10);
    CHECK(p.tail_mass == Approx(std::pow(2.0, -10)).margin(1e-15));
    // kept weights are renormalized over the truncation
    CHECK(weight_sum(p) == Approx(1.0).margin(1e-10));
    CHECK(p.weights[0] == Approx(0.5 / (1.0 - std::pow(2.0, -10))).margin(1e-15));
}

TEST_CASE("sieve validation rejects malformed specs") {
    auto g = make_grid(16);
    SieveSpec empty_level;
    empty_level.levels = {{flat_density(g)}, {}};
    empty_level.level_weights = {0.5, 0.5};
    CHECK_THROWS_WITH(sieve_mixture(empty_level, 2), ContainsSubstring("level 2 is empty"));

    SieveSpec heavy;
    heavy.levels = {{flat_density(g)}, {flat_density(g)}};
    heavy.level_weights = {0.7, 0.7};
    CHECK_THROWS_WITH(sieve_mixture(heavy, 2), ContainsSubstring("more than 1"));

    SieveSpec ok;
    ok.levels = {{flat_density(g)}};
    ok.level_weights = {1.0};
    CHECK_THROWS_AS(sieve_mixture(ok, 0), std::invalid_argument);
    CHECK_THROWS_AS(sieve_mixture(SieveSpec{}, 1), std::invalid_argument);
}

TEST_CASE("bernstein prior with a single order is the flat density") {
    auto g = make_grid(64);
    BernsteinPriorResult r = bernstein_prior([](int) { return 1.0; }, 1, 3, g);
    REQUIRE(r.prior.size() == 1);
    CHECK(r.prior.weights[0] == 1.0);
    CHECK(r.tail_mass == 0.0);
    for (double v : r.prior.atoms[0].values) CHECK(v == Approx(1.0).margin(1e-12));
}

TEST_CASE("bernstein prior lattice matches the hand count for two orders") {
    auto g = make_grid(64);
    // rho split evenly over orders 1 and 2; three weight cells give the
    // order-2 lattice {(0,1),(1/2,1/2),(1,0)}
    BernsteinPriorResult r = bernstein_prior([](int) { return 0.5; }, 2, 3, g);
    REQUIRE(r.prior.size() == 4);
    REQUIRE(r.atoms_per_order == std::vector<long long>{1, 3});
    CHECK(r.prior.weights[0] == Approx(0.5).margin(1e-15));
    for (int i = 1; i < 4; ++i)
        CHECK(r.prior.weights[static_cast<std::size_t>(i)] ==
              Approx(0.5 / 3.0).margin(1e-15));
    CHECK(r.prior.labels[0] == "k=1,cell=0");
    CHECK(r.prior.labels[3] == "k=2,cell=2");
    // lattice corner (0,1) is the beta(2,1) density 2x; corner (1,0) is 2(1-x)
    for (int i = 0; i < g->m; ++i) {
        double x = g->nodes[static_cast<std::size_t>(i)];
        CHECK(r.prior.atoms[1].values[static_cast<std::size_t>(i)] ==
              Approx(2.0 * x).epsilon(1e-10));
        CHECK(r.prior.atoms[3].values[static_cast<std::size_t>(i)] ==
              Approx(2.0 * (1.0 - x)).epsilon(1e-10));
    }
    // interior point (1/2,1/2) collapses to the flat density
    for (double v : r.prior.atoms[2].values) CHECK(v == Approx(1.0).margin(1e-10));
    // -log(1/2) / (2 log 2) = 1/2
    CHECK(r.c0_max == Approx(0.5).margin(1e-14));
}

TEST_CASE("bernstein prior per-order counts follow the binomial closed form") {
    auto g = make_grid(32);
    BernsteinPriorResult r =
        bernstein_prior([](int k) { return std::pow(0.5, k); }, 4, 3, g);
    // caps 3^(k-1) = 1, 3, 9, 27 admit resolutions 1, 2, 2, 3 and
    // C(r+k-1, k-1) = 1, 3, 6, 20 lattice points
    CHECK(r.atoms_per_order == std::vector<long long>{1, 3, 6, 20});
    CHECK(r.prior.size() == 30);
    CHECK(r.tail_mass == Approx(std::pow(0.5, 4)).margin(1e-15));
    CHECK(weight_sum(r.prior) == Approx(1.0).margin(1e-10));
}

TEST_CASE("bernstein prior records the heaviest admissible tail exponent") {
    auto g = make_grid(32);
    // rho(j) = j^-j makes (-log rho(j)) / (j log j) identically 1
    BernsteinPriorResult r = bernstein_prior(
        [](int k) { return std::pow(static_cast<double>(k), -k); }, 3, 3, g);
    CHECK(r.c0_max == Approx(1.0).margin(1e-12));
}

TEST_CASE("bernstein prior validates its arguments") {
    auto g = make_grid(32);
    auto one = [](int) { return 1.0; };
    CHECK_THROWS_AS(bernstein_prior(one, 0, 3, g), std::invalid_argument);
    CHECK_THROWS_AS(bernstein_prior(one, 2, 0, g), std::invalid_argument);
    CHECK_THROWS_WITH(bernstein_prior([](int) { return -1.0; }, 2, 3, g),
                      ContainsSubstring("nonnegative"));
    CHECK_THROWS_WITH(bernstein_prior([](int) { return 0.0; }, 2, 3, g),
                      ContainsSubstring("vanishes"));
    CHECK_THROWS_WITH(bernstein_prior(one, 2, 3, g, 0.0, 2),
                      ContainsSubstring("atom cap"));
}

TEST_CASE("family lattice prior spans the parameter box") {
    auto g = make_grid(64);
    SmoothFamilySpec spec;
    spec.features = {Feature{Feature::Kind::centered_monomial, 1}};
    spec.box = {{-1.0, 1.0}};
    AtomicPrior p = family_lattice_prior(spec, 3, g);
    REQUIRE(p.size() == 3);
    for (double w : p.weights) CHECK(w == Approx(1.0 / 3.0).margin(1e-15));
    CHECK(p.labels[0] == "theta=(-1)");
    CHECK(p.labels[1] == "theta=(0)");
    CHECK(p.labels[2] == "theta=(1)");
    // theta = 0 is the flat density
    for (double v : p.atoms[1].values) CHECK(v == Approx(1.0).margin(1e-12));

    // a single point per axis lands on the box midpoint
    AtomicPrior mid = family_lattice_prior(spec, 1, g);
    REQUIRE(mid.size() == 1);
    CHECK(mid.labels[0] == "theta=(0)");

    SmoothFamilySpec two = spec;
    two.features.push_back(Feature{Feature::Kind::cosine, 1});
    two.box.push_back({0.0, 2.0});
    AtomicPrior grid4 = family_lattice_prior(two, 2, g);
    REQUIRE(grid4.size() == 4);
    CHECK(grid4.labels[0] == "theta=(-1,0)");
    CHECK(grid4.labels[3] == "theta=(1,2)");

    CHECK_THROWS_AS(family_lattice_prior(spec, 0, g), std::invalid_argument);
    CHECK_THROWS_WITH(family_lattice_prior(two, 100, g, 0.0, 50),
                      ContainsSubstring("exceeds cap"));
}

TEST_CASE("prior_mass sums the weights of matching atoms") {
    auto g = make_grid(64);
    GridDensity f0 = testutil::half_mix(g, 0.5);
    std::vector<GridDensity> atoms{f0, testutil::half_mix(g, 0.4),
                                   testutil::half_mix(g, 0.1)};
    AtomicPrior p = make_atomic_prior(atoms, {0.2, 0.3, 0.5});
    CHECK(prior_mass(p, [](const GridDensity&) { return true; }) ==
          Approx(1.0).margin(1e-12));
    CHECK(prior_mass(p, [](const GridDensity&) { return false; }) == 0.0);

    // hand-computed root-weighted distances from f0 for the two-piece atoms:
    // the first atom is f0 itself, the others follow the two-term closed form
    auto direct = [](double a) {
        double left = 2.0 * (1.0 - a), right = 2.0 * a;
        double tl = (1.0 - std::sqrt(left)) * (1.0 - std::sqrt(left)) *
                    ((2.0 / 3.0) / std::sqrt(left) + 1.0 / 3.0) * 0.5;
        double tr = (1.0 - std::sqrt(right)) * (1.0 - std::sqrt(right)) *
                    ((2.0 / 3.0) / std::sqrt(right) + 1.0 / 3.0) * 0.5;
        return std::sqrt(tl + tr);
    };
    double near = direct(0.4), far = direct(0.1);
    REQUIRE(near < far);
    double eps = 0.5 * (near + far);
    double mass = prior_mass(p, [&](const GridDensity& a) {
        return hstar_extended(f0, a) <= eps;
    });
    CHECK(mass == Approx(0.5).margin(1e-12));
}

TEST_CASE("prior persistence round-trips in both storage flavors") {
    auto g = make_grid(48);
    Rng rng(23);
    SieveSpec spec;
    spec.levels = {{testutil::random_positive_density(g, rng)},
                   {testutil::random_positive_density(g, rng),
                    testutil::random_smooth_density(g, rng)}};
    spec.level_weights = {0.5, 0.25};
    AtomicPrior p = sieve_mixture(spec, 2);

    namespace fs = std::filesystem;
    for (bool packed : {true, false}) {
        fs::path dir = fs::temp_directory_path() /
                       (packed ? "ratelab_prior_packed" : "ratelab_prior_split");
        fs::remove_all(dir);
        save_prior(p, dir.string(), packed);
        AtomicPrior back = load_prior(dir.string());
        REQUIRE(back.size() == p.size());
        CHECK(back.tail_mass == Approx(p.tail_mass).margin(1e-15));
        for (int i = 0; i < p.size(); ++i) {
            auto j = static_cast<std::size_t>(i);
            CHECK(back.weights[j] == Approx(p.weights[j]).margin(1e-15));
            CHECK(back.labels[j] == p.labels[j]);
            for (std::size_t k = 0; k < p.atoms[j].values.size(); ++k)
                CHECK(back.atoms[j].values[k] ==
                      Approx(p.atoms[j].values[k]).epsilon(1e-12));
        }
        fs::remove_all(dir);
    }
}
