#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace ratelab;
using testutil::half_mix;
using testutil::random_positive_density;
using testutil::random_smooth_density;

namespace {

GridPtr big_grid() {
    static GridPtr g = make_grid(4096);
    return g;
}

GridDensity uniform_density(const GridPtr& g) {
    std::vector<double> v(static_cast<std::size_t>(g->m), 1.0);
    return normalize(v, g, 0.0);
}

GridDensity linear_density(const GridPtr& g) {
    std::vector<double> v(static_cast<std::size_t>(g->m));
    for (int i = 0; i < g->m; ++i)
        v[static_cast<std::size_t>(i)] = 2.0 * g->nodes[static_cast<std::size_t>(i)];
    return normalize(v, g, 0.0);
}

} // namespace

TEST_CASE("closed forms against the uniform/2x pair") {
    auto g = big_grid();
    auto f0 = uniform_density(g);
    auto f = linear_density(g);
    // H^2 = 2 - 2 int sqrt(2x) dx = 2 - 4 sqrt(2)/3
    double h_exact = std::sqrt(2.0 - 4.0 * std::sqrt(2.0) / 3.0);
    CHECK(hellinger(f0, f) == Catch::Approx(h_exact).margin(1e-3));
    CHECK(hellinger(f0, f) == Catch::Approx(0.33820).margin(1e-3));
    // K(f0,f) = -int log(2x) dx = 1 - log 2
    CHECK(kl(f0, f) == Catch::Approx(1.0 - std::log(2.0)).margin(1e-3));
    CHECK(kl(f0, f) == Catch::Approx(0.30685).margin(1e-3));
    // V(f0,f) = int log(2x)^2 dx = (1-log 2)^2 + 1
    double v_exact = (1.0 - std::log(2.0)) * (1.0 - std::log(2.0)) + 1.0;
    CHECK(v_divergence(f0, f) == Catch::Approx(v_exact).margin(2e-3));
    CHECK(v_divergence(f0, f) == Catch::Approx(1.09414).margin(2e-3));
}

TEST_CASE("hellinger basics") {
    auto g = make_grid(512);
    Rng rng(11);
    auto f = random_positive_density(g, rng);
    CHECK(hellinger(f, f) == 0.0);
    auto h = random_positive_density(g, rng);
    CHECK(hellinger(f, h) == hellinger(h, f));
    CHECK(hellinger(f, h) <= std::sqrt(2.0));
    // disjoint supports reach the ceiling sqrt(2)
    auto a = half_mix(g, 0.0);
    auto b = half_mix(g, 1.0);
    CHECK(hellinger(a, b) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("directional distance identity: E sqrt(f0/f) = 1 + 1.5 hstar^2") {
    auto g = make_grid(1024);
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        auto f0 = trial % 2 == 0 ? random_positive_density(g, rng)
                                 : random_smooth_density(g, rng);
        auto f = trial % 3 == 0 ? random_smooth_density(g, rng)
                                : random_positive_density(g, rng);
        std::vector<double> terms(static_cast<std::size_t>(g->m));
        for (std::size_t i = 0; i < terms.size(); ++i)
            terms[i] = f0.values[i] * std::sqrt(f0.values[i] / f.values[i]);
        double expectation = integrate(*g, terms);
        double hs = hstar(f0, f);
        CHECK(std::abs(expectation - 1.0 - 1.5 * hs * hs) <= 1e-10);
    }
}

TEST_CASE("divergence chain H/sqrt(3) <= H* <= H ratio^(1/4) <= sqrt(2) ratio^(1/4)") {
    auto g = make_grid(1024);
    Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        auto f0 = random_positive_density(g, rng);
        auto f = random_positive_density(g, rng);
        double h = hellinger(f0, f);
        double hs = hstar(f0, f);
        double ratio = sup_ratio(f0, f);
        CHECK(h / std::sqrt(3.0) <= hs + 1e-12);
        CHECK(hs <= h * std::pow(ratio, 0.25) + 1e-12);
        CHECK(hs <= h * std::pow(ratio, 0.5) + 1e-12);
    }
}

TEST_CASE("hstar is directional, not symmetric") {
    auto g = make_grid(512);
    Rng rng(5);
    auto f0 = random_positive_density(g, rng);
    auto f = random_smooth_density(g, rng);
    CHECK(hstar(f0, f) != Catch::Approx(hstar(f, f0)).margin(1e-6));
}

TEST_CASE("hstar rejects a vanishing second argument, extended variant does not") {
    auto g = make_grid(64);
    auto f0 = uniform_density(g);
    GridDensity dead = half_mix(g, 0.0); // zero on the right half
    CHECK_THROWS_AS(hstar(f0, dead), std::domain_error);
    CHECK(hstar_extended(f0, dead) == std::numeric_limits<double>::infinity());
    // f0 zero in the same places: those nodes drop out and the value is finite
    GridDensity also_dead = half_mix(g, 0.0);
    CHECK(std::isfinite(hstar_extended(dead, also_dead)));
    CHECK(hstar_extended(dead, also_dead) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("kl and v blow up where the second density vanishes") {
    auto g = make_grid(64);
    auto f0 = uniform_density(g);
    auto dead = half_mix(g, 0.0);
    CHECK(kl(f0, dead) == std::numeric_limits<double>::infinity());
    CHECK(v_divergence(f0, dead) == std::numeric_limits<double>::infinity());
    CHECK(sup_ratio(f0, dead) == std::numeric_limits<double>::infinity());
    // in the other direction everything is finite (0 log 0 = 0)
    CHECK(std::isfinite(kl(dead, f0)));
    CHECK(std::isfinite(v_divergence(dead, f0)));
    CHECK(std::isfinite(sup_ratio(dead, f0)));
}

TEST_CASE("kl is nonnegative") {
    auto g = make_grid(512);
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        auto f0 = random_positive_density(g, rng);
        auto f = random_positive_density(g, rng);
        CHECK(kl(f0, f) >= 0.0);
    }
}

TEST_CASE("one-pass report is bit-identical to individual calls") {
    auto g = make_grid(1024);
    Rng rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        auto f0 = random_positive_density(g, rng);
        auto f = random_smooth_density(g, rng);
        auto rep = divergence_report(f0, f);
        CHECK(rep.hellinger == hellinger(f0, f));
        CHECK(rep.hstar == hstar(f0, f));
        CHECK(rep.kl == kl(f0, f));
        CHECK(rep.v == v_divergence(f0, f));
        CHECK(rep.sup_ratio == sup_ratio(f0, f));
        CHECK_FALSE(rep.clamped);
    }
}

TEST_CASE("report flags clamped inputs") {
    auto g = make_grid(64);
    std::vector<double> v(64, 1.0);
    v[0] = 0.0;
    auto f0 = normalize(v, g, 1e-8);
    REQUIRE(f0.clamped);
    auto f = uniform_density(g);
    CHECK(divergence_report(f0, f).clamped);
    CHECK(divergence_report(f, f0).clamped);
}

TEST_CASE("divergences demand a common grid layout") {
    auto a = make_grid(64);
    auto b = make_grid(128);
    std::vector<double> va(64, 1.0), vb(128, 1.0);
    auto fa = normalize(va, a, 0.0);
    auto fb = normalize(vb, b, 0.0);
    CHECK_THROWS_AS(hellinger(fa, fb), std::invalid_argument);
    CHECK_THROWS_AS(divergence_report(fa, fb), std::invalid_argument);
}
