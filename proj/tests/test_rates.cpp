#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "latkey/rates.hpp"

using namespace latkey;

namespace {
const SourceParams kDegraded = SourceParams::markov(1, 1, 1, 0.95, 0.2);
}

TEST_CASE("public-rate bound reproduces the half-ln-eleven point") {
    // substitute (1/(2 pi e)) V1^(2/n) = 0.1 sigma1^2
    const double s1 = kDegraded.sigma1();
    const double v1_pow = 0.1 * s1 * s1 / kIdealSecondMoment;
    const auto b = rate_bounds(kDegraded, v1_pow);
    CHECK(b.r_p_bound == Catch::Approx(0.5 * std::log(11.0)).epsilon(1e-12));
    CHECK(b.r_p_bound == Catch::Approx(1.19895).margin(1e-4));
}

TEST_CASE("vanishing quantizer volume closes the gap to half a nat") {
    const double s1 = kDegraded.sigma1();
    double prev_gap = std::numeric_limits<double>::infinity();
    for (double ratio : {1e-1, 1e-3, 1e-5, 1e-7, 1e-9}) {
        const auto b = rate_bounds(kDegraded, ratio * s1 * s1 / kIdealSecondMoment);
        CHECK(b.gap < prev_gap);
        CHECK(b.gap > 0.5);
        prev_gap = b.gap;
    }
    const auto tiny = rate_bounds(kDegraded, 1e-9 * s1 * s1 / kIdealSecondMoment);
    CHECK(tiny.gap == Catch::Approx(0.5).margin(1e-8));
    CHECK(tiny.r_k_bound == Catch::Approx(tiny.quasi_optimal).margin(1e-8));
}

TEST_CASE("non-degraded boundary is flagged infeasible") {
    const auto flat = SourceParams::markov(1, 1, 1, 0.4, 0.4);
    const NestedChain chain(LatticeBasis::zn(2, 0.2), 2, 2);
    const auto r = rate_report(chain, flat);
    CHECK(r.bounds.upper_bound == Catch::Approx(0.0).margin(1e-14));
    CHECK(r.bounds.quasi_optimal == Catch::Approx(-0.5).margin(1e-14));
    CHECK_FALSE(r.degraded);
    CHECK_FALSE(r.feasible);
}

TEST_CASE("upper bound equals the mutual-information difference") {
    Rng rng(61, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const double rxy = 0.5 + 0.45 * rng.next_unit();
        const double rxz = 0.4 * rng.next_unit();
        const auto p = SourceParams::markov(0.5 + rng.next_unit(), 1.0, 1.0, rxy, rxz);
        REQUIRE(p.degraded());
        const auto rep2 = degradedness_report(p);
        const auto b = rate_bounds(p, 1e-3);
        CHECK(b.upper_bound == Catch::Approx(rep2.mi_xy - rep2.mi_xz).margin(1e-12));
    }
}

TEST_CASE("key-rate bound is monotone in volume and noise") {
    const double s1 = kDegraded.sigma1();
    // decreasing in V1
    double prev = std::numeric_limits<double>::infinity();
    for (double v1 : {1e-4, 1e-3, 1e-2, 1e-1}) {
        const auto b = rate_bounds(kDegraded, v1);
        CHECK(b.r_k_bound < prev);
        prev = b.r_k_bound;
    }
    // increasing in sigma2 (scan rho_xz downward)
    double prev_rk = -std::numeric_limits<double>::infinity();
    for (double rxz : {0.6, 0.4, 0.2, 0.05}) {
        const auto p = SourceParams::markov(1, 1, 1, 0.95, rxz);
        const auto b = rate_bounds(p, 1e-3 * s1 * s1);
        CHECK(b.r_k_bound > prev_rk);
        prev_rk = b.r_k_bound;
    }
}

TEST_CASE("realized chain rates and the goodness predicates") {
    const NestedChain chain(LatticeBasis::zn(4, 0.1), 4, 3);
    const auto r = rate_report(chain, kDegraded);
    CHECK(r.r_k == Catch::Approx(std::log(3.0)).epsilon(1e-14));
    CHECK(r.r_p == Catch::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(r.v1_pow == Catch::Approx(0.01).epsilon(1e-12));
    // predicates computed from the chain volumes
    const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
    const double lhs = r.v2_pow / (r.g_lambda1 * r.v1_pow +
                                   kDegraded.sigma1() * kDegraded.sigma1());
    CHECK(r.awgn_condition == (lhs > two_pi_e));
    CHECK(r.secrecy_condition ==
          (r.v3_pow / (kDegraded.sigma2() * kDegraded.sigma2()) <
           2.0 * std::numbers::pi));
}

TEST_CASE("calibration refuses non-degraded sources") {
    const auto bad = SourceParams::markov(1, 1, 1, 0.2, 0.9);
    try {
        chain_calibrate(bad, "Zn", 2, 0.05);
        FAIL("expected infeasible");
    } catch (const InfeasibleError& e) {
        CHECK(std::string(e.what()).find("upperBound") != std::string::npos);
        CHECK(e.exit_code() == 3);
    }
}

TEST_CASE("calibration finds a feasible chain in the reference setup") {
    // at rho_xy = 0.95 the noise predicate forces a loose flatness target;
    // the search records the binding tradeoff
    const auto r = chain_calibrate(kDegraded, "Zn", 4, 0.6);
    CHECK(r.achieved_epsilon <= 0.6);
    CHECK(r.achieved_epsilon > 0.3);  // the scale search saturates the target
    CHECK(r.eq9_ratio > 1.0);
    CHECK(r.chain.scale2() >= 2);
    CHECK(r.chain.scale3() >= 2);
    CHECK(r.base_scale > 0.0);
    CHECK(r.rates.r_k == Catch::Approx(std::log(static_cast<double>(r.chain.scale3()))));
    CHECK(r.g_lambda1 == Catch::Approx(1.0 / 12.0));

    // a tighter flatness target becomes infeasible at these correlations
    CHECK_THROWS_AS(chain_calibrate(kDegraded, "Zn", 4, 0.05), InfeasibleError);
}

TEST_CASE("a vacuous flatness target reduces calibration to the noise predicate") {
    CalibrateOptions opts;
    opts.max_scale3 = 8;
    const auto r = chain_calibrate(kDegraded, "Zn", 2, 1e3, opts);
    CHECK(r.chain.scale3() == 8);  // key rate saturates the cap
    CHECK(r.eq9_ratio > 1.0);
}

TEST_CASE("a stricter margin shrinks the feasible key rate") {
    const auto strong = SourceParams::markov(1, 1, 1, 0.999, 0.2);
    CalibrateOptions strict;
    strict.eq9_margin = 6.0;
    strict.max_scale2 = 8;
    const auto loose = chain_calibrate(strong, "Zn", 1, 0.05);
    const auto tight = chain_calibrate(strong, "Zn", 1, 0.05, strict);
    CHECK(tight.chain.scale3() < loose.chain.scale3());
    CHECK(tight.eq9_ratio > 6.0);
    CHECK(loose.eq9_ratio > 1.0);
}
