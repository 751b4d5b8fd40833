#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latkey/key_agreement.hpp"
#include "latkey/theta.hpp"
#include "test_util.hpp"

using namespace latkey;

namespace {

Eigen::VectorXd vec1(double a) {
    Eigen::VectorXd v(1);
    v << a;
    return v;
}

const SourceParams kDegraded = SourceParams::markov(1, 1, 1, 0.95, 0.2);

}  // namespace

TEST_CASE("encoder walkthrough on the integer chain") {
    const NestedChain chain(LatticeBasis::zn(1), 4, 2);  // Z > 4Z > 8Z
    const auto enc = alice_encode(vec1(2.6), chain);
    CHECK(enc.x_q(0) == 3.0);
    CHECK(enc.s_leader(0) == -1.0);  // Voronoi leader of 3 + 4Z
    CHECK(enc.s_index == 3);
    CHECK(enc.k_leader(0) == 4.0);
    CHECK(enc.k_index == 1);
    CHECK(enc.e_q(0) == Catch::Approx(-0.4).margin(1e-12));

    // points of the coarse lattice wash out entirely
    const auto zero = alice_encode(vec1(8.0), chain);
    CHECK(zero.s_index == 0);
    CHECK(zero.k_index == 0);
    CHECK(zero.s_leader(0) == 0.0);
    CHECK(zero.k_leader(0) == 0.0);
}

TEST_CASE("decoder walkthrough, success and failure") {
    const NestedChain chain(LatticeBasis::zn(1), 4, 2);
    const auto enc = alice_encode(vec1(2.6), chain);

    // y scaled so that the effective observation is 2.9
    const auto ok = bob_decode(vec1(2.9 / kDegraded.coeff_y()), enc.s_index, chain, kDegraded);
    CHECK(ok.x_hat_q(0) == 3.0);
    CHECK(ok.k_hat_index == enc.k_index);

    // effective observation 5.7: lands in the wrong Lambda2 cell
    const auto bad = bob_decode(vec1(5.7 / kDegraded.coeff_y()), enc.s_index, chain, kDegraded);
    CHECK(bad.x_hat_q(0) == 7.0);
    CHECK(bad.x_hat_coords != enc.xq_coords);

    CHECK_THROWS_AS(bob_decode(vec1(0.0), 4, chain, kDegraded), ConfigError);
}

TEST_CASE("noiseless observation always reproduces the key") {
    Rng rng(51, 0);
    const NestedChain chain(LatticeBasis::zn(2, 0.6), 2, 3);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto x = testutil::random_vector(rng, 2, 6.0);
        const auto enc = alice_encode(x, chain);
        const auto dec = bob_decode(x / kDegraded.coeff_y(), enc.s_index, chain, kDegraded);
        REQUIRE(dec.k_hat_index == enc.k_index);
        REQUIRE(dec.x_hat_coords == enc.xq_coords);
    }
}

TEST_CASE("the public message and key are functions of x mod the coarse lattice") {
    Rng rng(52, 0);
    for (const auto key_region : {RegionKind::Parallelepiped, RegionKind::Voronoi}) {
        const NestedChain chains[] = {
            NestedChain(LatticeBasis::dn(2, 0.7), 2, 2, key_region),
            NestedChain(LatticeBasis::zn(3, 0.9), 2, 3, key_region),
            NestedChain(LatticeBasis::e8(0.8), 2, 2, key_region),
        };
        for (const auto& chain : chains) {
            const int n = chain.dimension();
            const auto& l3 = chain.lambda3();
            for (int rep = 0; rep < 1000; ++rep) {
                const auto x = testutil::random_vector(rng, n, 5.0);
                const Eigen::VectorXd lam3 =
                    l3.point_at(testutil::random_int_coords(rng, n, 3));
                const auto a = alice_encode(x, chain);
                const auto b = alice_encode(x + lam3, chain);
                REQUIRE(a.s_index == b.s_index);
                REQUIRE(a.k_index == b.k_index);
            }
        }
    }
}

TEST_CASE("the quantization decomposition holds on every draw") {
    Rng rng(53, 0);
    const NestedChain chains[] = {
        NestedChain(LatticeBasis::zn(1), 4, 2),
        NestedChain(LatticeBasis::zn(4, 0.4), 2, 2),
        NestedChain(LatticeBasis::dn(4, 0.5), 2, 3, RegionKind::Voronoi),
    };
    for (const auto& chain : chains) {
        const auto& l3 = chain.lambda3();
        for (int rep = 0; rep < 1000; ++rep) {
            const auto x = testutil::random_vector(rng, chain.dimension(), 7.0);
            const auto enc = alice_encode(x, chain);
            const Eigen::VectorXd residual =
                l3.coords_of(x - enc.e_q - enc.s_leader - enc.k_leader);
            for (int i = 0; i < chain.dimension(); ++i) {
                REQUIRE(std::abs(residual(i) - std::nearbyint(residual(i))) < 1e-9);
            }
            // the quantization error lives in the Voronoi region of Lambda1
            for (int j = 0; j < chain.dimension(); ++j) {
                for (double sgn : {-1.0, 1.0}) {
                    const Eigen::VectorXd shifted =
                        enc.e_q + sgn * chain.lambda1().basis().col(j);
                    REQUIRE(enc.e_q.norm() <= shifted.norm() + 1e-9);
                }
            }
        }
    }
}

TEST_CASE("reliability equivalence is exact per trial") {
    Rng rng(54, 0);
    const NestedChain chain(LatticeBasis::zn(2, 0.5), 2, 2);
    const auto& l2 = chain.lambda2();
    int successes = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        Rng trial_rng(54, static_cast<std::uint64_t>(rep) + 1);
        const auto s = sample_xyz(kDegraded, 2, trial_rng);
        const auto enc = alice_encode(s.x, chain);
        const auto dec = bob_decode(s.y, enc.s_index, chain, kDegraded);
        const bool xq_match = enc.xq_coords == dec.x_hat_coords;
        const Eigen::VectorXd w1 = s.x - kDegraded.coeff_y() * s.y;
        const bool predicate = [&]() {
            for (auto c : l2.nearest_coords(enc.e_q - w1)) {
                if (c != 0) return false;
            }
            return true;
        }();
        REQUIRE(predicate == xq_match);
        if (xq_match) ++successes;
    }
    CHECK(successes > 0);
    CHECK(successes < 1000);  // the chain is noisy enough to see both sides
}

TEST_CASE("trial metrics: counts, determinism, guards") {
    const NestedChain chain(LatticeBasis::zn(2, 0.45), 2, 2);
    RunOptions opts;
    opts.bootstrap_reps = 20;
    const auto m = run_trials(chain, kDegraded, 4000, 99, opts);

    std::uint64_t total = 0;
    for (auto c : m.key_histogram) total += c;
    CHECK(total == m.trials);
    CHECK(m.key_entropy <=
          std::log(static_cast<double>(chain.key_cardinality())) + 1e-12);
    CHECK(m.predicate_soundness_violations == 0);
    CHECK(m.reliability_predicate_agreement == 1.0);
    CHECK(m.eq_decomposition_max_dev < 1e-9);
    CHECK(m.d_av >= 0.0);
    CHECK(m.d_av <= 1.0);
    CHECK(m.secrecy_bound >= 0.0);

    RunOptions threaded = opts;
    threaded.threads = 3;
    const auto m3 = run_trials(chain, kDegraded, 4000, 99, threaded);
    CHECK(m.error_rate == m3.error_rate);
    CHECK(m.key_entropy == m3.key_entropy);
    CHECK(m.d_av == m3.d_av);
    CHECK(m.key_histogram == m3.key_histogram);

    CHECK_THROWS_AS(run_trials(chain, kDegraded, 500, 1, opts), ConfigError);
    // resolution guard: 20 * |K| > trials
    const NestedChain wide(LatticeBasis::zn(2, 0.45), 2, 8);
    CHECK_THROWS_AS(run_trials(wide, kDegraded, 1000, 1, opts), ConfigError);
}

TEST_CASE("a well-scaled chain decodes reliably and distributes keys evenly") {
    // sigma1 = 0.312; Lambda2 spacing 1.75 gives ~2.7 sigma of margin per
    // coordinate
    const NestedChain chain(LatticeBasis::zn(4, 0.35), 5, 2);
    RunOptions opts;
    opts.bootstrap_reps = 10;
    const auto m = run_trials(chain, kDegraded, 20'000, 7, opts);
    CHECK(m.error_rate < 0.05);
    const double eps3 = flatness_factor(chain.lambda3(), kDegraded.sigma_x).epsilon;
    const double inv_card = 1.0 / static_cast<double>(chain.key_cardinality());
    CHECK(m.key_uniformity_deviation <=
          eps3 * inv_card + 3.0 * m.key_uniformity_max_se);
    CHECK(m.predicate_soundness_violations == 0);
}

TEST_CASE("an overwhelmed decoder outputs effectively random keys") {
    // Lambda2 much finer than Bob's effective observation noise, so his
    // quantized guess wanders over many cells uncorrelated with the key
    const auto noisy = SourceParams::markov(1, 1, 1, 0.1, 0.05);
    const NestedChain chain(LatticeBasis::zn(2, 0.02), 2, 2);
    const auto m = run_trials(chain, noisy, 20'000, 8);
    const double k = static_cast<double>(chain.key_cardinality());
    CHECK(m.error_rate > 1.0 - 1.0 / k - 0.1);
    CHECK(m.error_rate < 1.0);
}

TEST_CASE("secrecy bound formula is monotone below the knee") {
    const double card = 16.0;
    double prev = 0.0;
    for (double dav : {0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0}) {
        if (dav >= card / std::numbers::e) break;
        const double bound = dav * std::log(card / dav);
        CHECK(bound > prev);
        prev = bound;
    }
}
