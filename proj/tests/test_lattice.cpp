#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latkey/lattice.hpp"
#include "test_util.hpp"

using namespace latkey;

namespace {

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("parallelepiped reduction, coordinate examples") {
    const auto z2 = LatticeBasis::zn(2);
    const auto r = z2.mod_region(vec2(1.3, -0.2), RegionKind::Parallelepiped);
    CHECK(r(0) == Catch::Approx(0.3).margin(1e-12));
    CHECK(r(1) == Catch::Approx(0.8).margin(1e-12));

    Eigen::MatrixXd b(2, 2);
    b << 2, 0, 0, 1;
    const auto rect = LatticeBasis::custom(b, Decoder::CoordinateWise);
    const auto r2 = rect.mod_region(vec2(2.5, 0.0), RegionKind::Parallelepiped);
    CHECK(r2(0) == Catch::Approx(0.5).margin(1e-12));
    CHECK(r2(1) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("lattice points reduce to the zero vector in both regions") {
    Rng rng(101, 0);
    for (const auto& lat : {LatticeBasis::zn(3, 0.7), LatticeBasis::dn(4, 1.3),
                            LatticeBasis::e8()}) {
        for (int rep = 0; rep < 50; ++rep) {
            const auto coords = testutil::random_int_coords(rng, lat.dimension(), 5);
            const Eigen::VectorXd point = lat.point_at(coords);
            CHECK(lat.mod_region(point, RegionKind::Parallelepiped).norm() == 0.0);
            CHECK(lat.mod_region(point, RegionKind::Voronoi).norm() == 0.0);
        }
    }
}

TEST_CASE("reduction lands in the region and differs by a lattice point") {
    Rng rng(102, 0);
    Eigen::MatrixXd skew(3, 3);
    skew << 1.0, 0.4, -0.2,
            0.0, 1.1, 0.3,
            0.0, 0.0, 0.9;
    const auto lattices = {LatticeBasis::zn(3, 0.6), LatticeBasis::dn(3),
                           LatticeBasis::custom(skew)};
    for (const auto& lat : lattices) {
        for (int rep = 0; rep < 200; ++rep) {
            const auto x = testutil::random_vector(rng, lat.dimension(), 8.0);
            for (auto kind : {RegionKind::Parallelepiped, RegionKind::Voronoi}) {
                const auto r = lat.mod_region(x, kind);
                const Eigen::VectorXd diff_coords = lat.coords_of(r - x);
                for (int i = 0; i < lat.dimension(); ++i) {
                    CHECK(std::abs(diff_coords(i) - std::nearbyint(diff_coords(i))) < 1e-9);
                }
                if (kind == RegionKind::Parallelepiped) {
                    const auto u = lat.coords_of(r);
                    for (int i = 0; i < lat.dimension(); ++i) {
                        CHECK(u(i) > -1e-8);
                        CHECK(u(i) < 1.0 + 1e-8);
                    }
                } else {
                    // closer to the origin than to any nearby lattice point
                    for (int j = 0; j < lat.dimension(); ++j) {
                        for (double sgn : {-1.0, 1.0}) {
                            const Eigen::VectorXd shifted = r + sgn * lat.basis().col(j);
                            CHECK(r.norm() <= shifted.norm() + 1e-9);
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("reduction is an exact fixpoint on its own image") {
    Rng rng(103, 0);
    Eigen::MatrixXd skew(2, 2);
    skew << 1.0, 0.37, 0.0, 0.81;
    const auto lattices = {LatticeBasis::zn(2, 1.7), LatticeBasis::dn(4, 0.9),
                           LatticeBasis::e8(0.6), LatticeBasis::custom(skew)};
    for (const auto& lat : lattices) {
        for (int rep = 0; rep < 200; ++rep) {
            const auto x = testutil::random_vector(rng, lat.dimension(), 6.0);
            for (auto kind : {RegionKind::Parallelepiped, RegionKind::Voronoi}) {
                const Eigen::VectorXd once = lat.mod_region(x, kind);
                const Eigen::VectorXd twice = lat.mod_region(once, kind);
                CHECK(once == twice);  // bitwise
            }
        }
    }
}

TEST_CASE("nearest point, coordinate examples") {
    const auto z2 = LatticeBasis::zn(2);
    const auto q = z2.nearest_point(vec2(0.6, -1.2));
    CHECK(q(0) == 1.0);
    CHECK(q(1) == -1.0);

    // half-integer input resolves to the even neighbor
    const auto z1 = LatticeBasis::zn(1);
    Eigen::VectorXd half(1);
    half << 0.5;
    CHECK(z1.nearest_point(half)(0) == 0.0);
    half << 1.5;
    CHECK(z1.nearest_point(half)(0) == 2.0);

    const auto d2 = LatticeBasis::dn(2);
    const auto qd = d2.nearest_point(vec2(0.9, 0.2));
    CHECK(qd(0) == 1.0);
    CHECK(qd(1) == 1.0);
    // exhaustive oracle within radius 2 confirms optimality
    const double best = testutil::brute_force_min_dist(d2.basis(), vec2(0.9, 0.2), 2.0);
    CHECK((qd - vec2(0.9, 0.2)).norm() == Catch::Approx(best).margin(1e-12));
}

TEST_CASE("quantizer matches brute force in low dimension") {
    Rng rng(104, 0);
    Eigen::MatrixXd skew(3, 3);
    skew << 1.0, 0.3, 0.1,
            0.0, 0.8, -0.4,
            0.0, 0.0, 1.2;
    const auto lattices = {LatticeBasis::dn(2), LatticeBasis::dn(4),
                           LatticeBasis::custom(skew), LatticeBasis::zn(4, 0.75)};
    for (const auto& lat : lattices) {
        double max_col = 0.0;
        for (int j = 0; j < lat.dimension(); ++j) {
            max_col = std::max(max_col, lat.basis().col(j).norm());
        }
        for (int rep = 0; rep < 1000; ++rep) {
            const auto x = testutil::random_vector(rng, lat.dimension(), 2.0 * max_col);
            const double ours = (lat.nearest_point(x) - x).norm();
            const double oracle = testutil::brute_force_min_dist(lat.basis(), x, 3.0 * max_col);
            REQUIRE(ours == Catch::Approx(oracle).margin(1e-12));
        }
    }
}

TEST_CASE("fast decoders agree with exact enumeration") {
    Rng rng(105, 0);
    const auto check_pair = [&](const LatticeBasis& fast, double span) {
        const LatticeBasis exact =
            LatticeBasis::custom(fast.basis(), Decoder::Enumeration);
        for (int rep = 0; rep < 1000; ++rep) {
            const auto x = testutil::random_vector(rng, fast.dimension(), span);
            const double df = (fast.nearest_point(x) - x).norm();
            const double de = (exact.nearest_point(x) - x).norm();
            REQUIRE(df == Catch::Approx(de).margin(1e-12));
        }
    };
    check_pair(LatticeBasis::zn(5, 1.4), 6.0);
    check_pair(LatticeBasis::dn(4), 4.0);
    check_pair(LatticeBasis::dn(6, 0.8), 4.0);
    check_pair(LatticeBasis::e8(), 3.0);
}

TEST_CASE("dimension and decoder guards") {
    CHECK_THROWS_AS(LatticeBasis::zn(2).nearest_point(Eigen::VectorXd::Zero(3)),
                    ConfigError);
    Eigen::MatrixXd singular(2, 2);
    singular << 1, 2, 2, 4;
    CHECK_THROWS_AS(LatticeBasis::custom(singular), ConfigError);
    CHECK_THROWS_AS(LatticeBasis::custom(Eigen::MatrixXd::Identity(13, 13),
                                         Decoder::Enumeration),
                    ConfigError);
    // coordinate-wise decoding demands orthogonal columns
    Eigen::MatrixXd skew(2, 2);
    skew << 1, 0.5, 0, 1;
    CHECK_THROWS_AS(LatticeBasis::custom(skew, Decoder::CoordinateWise), ConfigError);
}

TEST_CASE("volume matches the basis determinant") {
    Rng rng(106, 0);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Identity(3, 3);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) b(i, j) += 0.3 * (2.0 * rng.next_unit() - 1.0);
        }
        const auto lat = LatticeBasis::custom(b);
        CHECK(lat.volume() ==
              Catch::Approx(std::abs(b.determinant())).epsilon(1e-12));
    }
    CHECK(LatticeBasis::dn(4).volume() == Catch::Approx(2.0).epsilon(1e-12));
    CHECK(LatticeBasis::e8().volume() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coset index, examples") {
    // 4Z / 8Z: cosets {0, 4}
    const auto fine1 = LatticeBasis::zn(1, 4.0);
    const auto coarse1 = LatticeBasis::zn(1, 8.0);
    Eigen::VectorXd lam(1);
    lam << 4.0;
    CHECK(coset_index(lam, fine1, coarse1) == 1);
    lam << 0.0;
    CHECK(coset_index(lam, fine1, coarse1) == 0);

    // Z^2 / 2Z^2, digit order little-endian on coordinates
    const auto fine2 = LatticeBasis::zn(2);
    const auto coarse2 = LatticeBasis::zn(2, 2.0);
    CHECK(coset_index(vec2(1, 0), fine2, coarse2) == 1);
    CHECK(coset_index(vec2(0, 1), fine2, coarse2) == 2);

    CHECK_THROWS_AS(coset_index(vec2(0.5, 0), fine2, coarse2), ConfigError);
}

TEST_CASE("coset leader inverts coset index") {
    const auto cases = {std::pair{LatticeBasis::zn(2), 3},
                        std::pair{LatticeBasis::dn(2), 2},
                        std::pair{LatticeBasis::zn(3, 0.5), 2},
                        std::pair{LatticeBasis::e8(), 2}};
    for (const auto& [fine, m] : cases) {
        const auto coarse = fine.scaled(m);
        const std::uint64_t count =
            static_cast<std::uint64_t>(std::pow(m, fine.dimension()) + 0.5);
        for (std::uint64_t idx = 0; idx < count; ++idx) {
            const auto leader = coset_leader(idx, fine, coarse);
            CHECK(coset_index(leader, fine, coarse) == idx);
            const auto vor = coset_leader(idx, fine, coarse, RegionKind::Voronoi);
            CHECK(coset_index(vor, fine, coarse) == idx);
        }
    }
}

TEST_CASE("quantizer distributes over coarse-lattice shifts") {
    Rng rng(107, 0);
    for (const auto& base : {LatticeBasis::zn(2, 0.8), LatticeBasis::dn(4)}) {
        const auto l2 = base.scaled(3);
        for (int rep = 0; rep < 300; ++rep) {
            const auto y = testutil::random_vector(rng, base.dimension(), 5.0);
            const auto shift = testutil::random_int_coords(rng, base.dimension(), 3);
            const Eigen::VectorXd lam2 = l2.point_at(shift);
            const auto q_plain = l2.nearest_coords(y);
            const auto q_shifted = l2.nearest_coords(y + lam2);
            for (std::size_t i = 0; i < q_plain.size(); ++i) {
                CHECK(q_shifted[i] == q_plain[i] + shift[i]);
            }
        }
    }
}

TEST_CASE("nested chain volumes and cardinalities") {
    const NestedChain chain(LatticeBasis::dn(4, 0.5), 2, 3);
    const int n = 4;
    CHECK(chain.volume2() / chain.volume1() ==
          Catch::Approx(std::pow(2.0, n)).epsilon(1e-12));
    CHECK(chain.volume3() / chain.volume2() ==
          Catch::Approx(std::pow(3.0, n)).epsilon(1e-12));
    CHECK(chain.key_cardinality() == 81);
    CHECK(chain.public_cardinality() == 16);
    CHECK(chain.key_rate() == Catch::Approx(std::log(3.0)));
    CHECK(chain.public_rate() == Catch::Approx(std::log(2.0)));

    // exact nesting: each Lambda3 basis vector is an integer combination of
    // Lambda2's basis (and likewise Lambda2 in Lambda1)
    const Eigen::MatrixXd m32 =
        chain.lambda2().inverse() * chain.lambda3().basis();
    const Eigen::MatrixXd m21 =
        chain.lambda1().inverse() * chain.lambda2().basis();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            CHECK(std::abs(m32(i, j) - std::nearbyint(m32(i, j))) < 1e-12);
            CHECK(std::abs(m21(i, j) - std::nearbyint(m21(i, j))) < 1e-12);
        }
    }
    CHECK_THROWS_AS(NestedChain(LatticeBasis::zn(1), 1, 2), ConfigError);
}

TEST_CASE("second moment estimates") {
    const auto g1 = second_moment_estimate(LatticeBasis::zn(1), 100'000, 11);
    CHECK(std::abs(g1.value - 1.0 / 12.0) < 3.0 * g1.stderr_);

    // scale invariance
    const auto g1s = second_moment_estimate(LatticeBasis::zn(1, 3.0), 100'000, 12);
    CHECK(std::abs(g1s.value - g1.value) < 3.0 * (g1.stderr_ + g1s.stderr_));

    // E8 sits between the sphere bound and the cubic value
    const auto g8 = second_moment_estimate(LatticeBasis::e8(), 100'000, 13);
    CHECK(g8.value > 1.0 / (2.0 * std::numbers::pi * std::numbers::e));
    CHECK(g8.value < 1.0 / 12.0 + 3.0 * g8.stderr_);

    CHECK_THROWS_AS(second_moment_estimate(LatticeBasis::zn(1), 100, 1), ConfigError);
}

TEST_CASE("family names parse") {
    CHECK(lattice_from_name("Zn:4").dimension() == 4);
    CHECK(lattice_from_name("Dn:3").dimension() == 3);
    CHECK(lattice_from_name("E8").dimension() == 8);
    CHECK(lattice_from_name("Zn:2", 0.5).volume() == Catch::Approx(0.25));
    CHECK_THROWS_AS(lattice_from_name("Leech"), ConfigError);
    CHECK_THROWS_AS(lattice_from_name("Zn:x"), ConfigError);
}
