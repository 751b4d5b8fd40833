#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latkey/enumerate.hpp"
#include "latkey/errors.hpp"
#include "latkey/rng.hpp"
#include "latkey/stats.hpp"

namespace latkey {

enum class Decoder { CoordinateWise, DnFast, E8Fast, Enumeration };
enum class RegionKind { Parallelepiped, Voronoi };
enum class LatticeFamily { Zn, Dn, E8, Custom };

inline const char* to_string(RegionKind k) {
    return k == RegionKind::Parallelepiped ? "parallelepiped" : "voronoi";
}

// An n-dimensional lattice { B u : u integer }, basis vectors in the columns
// of B. Family-tagged instances carry the scale so the round-and-repair
// decoders can normalize; everything else goes through exact enumeration.
class LatticeBasis {
public:
    static constexpr int kEnumerationDimensionCap = 12;
    static constexpr double kIntegralityTol = 1e-9;

    static LatticeBasis zn(int n, double scale = 1.0) {
        require_dim_(n);
        Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n) * scale;
        return LatticeBasis(std::move(b), Decoder::CoordinateWise,
                            LatticeFamily::Zn, scale, "Zn:" + std::to_string(n));
    }

    // D_n = { x integer : sum x_i even }; columns 2e_1 and e_1 + e_i.
    static LatticeBasis dn(int n, double scale = 1.0) {
        require_dim_(n);
        if (n < 2) throw ConfigError("Dn family requires n >= 2");
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
        b(0, 0) = 2.0;
        for (int j = 1; j < n; ++j) {
            b(0, j) = 1.0;
            b(j, j) = 1.0;
        }
        b *= scale;
        return LatticeBasis(std::move(b), Decoder::DnFast, LatticeFamily::Dn,
                            scale, "Dn:" + std::to_string(n));
    }

    // Gosset lattice E8 = D8 union (D8 + half-ones); unit volume basis.
    static LatticeBasis e8(double scale = 1.0) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(8, 8);
        b(0, 0) = 2.0;
        for (int j = 1; j < 7; ++j) {
            b(j - 1, j) = -1.0;
            b(j, j) = 1.0;
        }
        for (int i = 0; i < 8; ++i) b(i, 7) = 0.5;
        b *= scale;
        return LatticeBasis(std::move(b), Decoder::E8Fast, LatticeFamily::E8,
                            scale, "E8");
    }

    static LatticeBasis custom(Eigen::MatrixXd basis,
                               Decoder decoder = Decoder::Enumeration) {
        return LatticeBasis(std::move(basis), decoder, LatticeFamily::Custom,
                            1.0, "custom");
    }

    int dimension() const { return n_; }
    const Eigen::MatrixXd& basis() const { return basis_; }
    const Eigen::MatrixXd& inverse() const { return inverse_; }
    double volume() const { return volume_; }
    Decoder decoder() const { return decoder_; }
    LatticeFamily family() const { return family_; }
    double scale() const { return scale_; }
    const std::string& name() const { return name_; }

    double volume_pow_2n() const { return std::pow(volume_, 2.0 / n_); }

    LatticeBasis scaled(double c) const {
        if (!(c > 0.0) || !std::isfinite(c)) {
            throw ConfigError("lattice scale must be positive and finite");
        }
        return LatticeBasis(basis_ * c, decoder_, family_, scale_ * c, name_);
    }

    // Dual lattice (inverse transpose basis). Returned as a custom-family
    // lattice decoded by enumeration: the Poisson-route flatness oracle must
    // not share the primal fast paths.
    LatticeBasis dual() const {
        Eigen::MatrixXd b = inverse_.transpose();
        if (n_ > kEnumerationDimensionCap) {
            throw NumericalGuardError("dual enumeration limited to n <= 12");
        }
        return LatticeBasis(std::move(b), Decoder::Enumeration,
                            LatticeFamily::Custom, 1.0, name_ + "*");
    }

    // Norm of the shortest nonzero vector (closed form for named families).
    double minimum_norm() const {
        switch (family_) {
            case LatticeFamily::Zn: return scale_;
            case LatticeFamily::Dn:
            case LatticeFamily::E8: return scale_ * std::sqrt(2.0);
            case LatticeFamily::Custom: break;
        }
        if (!cached_min_norm_) cached_min_norm_ = enumerator().shortest_nonzero_norm();
        return *cached_min_norm_;
    }

    const SphereEnumerator& enumerator() const {
        if (!enumerator_) enumerator_ = std::make_shared<SphereEnumerator>(basis_);
        return *enumerator_;
    }

    // --- nearest-neighbor quantizer -------------------------------------

    // Integer coordinates u of Q(x) = B u, the closest lattice point to x.
    std::vector<long long> nearest_coords(const Eigen::VectorXd& x) const {
        check_dim_(x);
        switch (decoder_) {
            case Decoder::CoordinateWise: return nearest_coordinate_wise_(x);
            case Decoder::DnFast: return nearest_dn_(x);
            case Decoder::E8Fast: return nearest_e8_(x);
            case Decoder::Enumeration: return enumerator().closest(x);
        }
        throw ConfigError("unknown decoder");
    }

    Eigen::VectorXd nearest_point(const Eigen::VectorXd& x) const {
        return point_at(nearest_coords(x));
    }

    Eigen::VectorXd point_at(const std::vector<long long>& coords) const {
        Eigen::VectorXd u(n_);
        for (int i = 0; i < n_; ++i) u(i) = static_cast<double>(coords[static_cast<std::size_t>(i)]);
        return basis_ * u;
    }

    // --- fundamental-region reduction ------------------------------------

    // x mod R(Lambda). The reduced point differs from x by a lattice vector;
    // an already-reduced input is returned unchanged so the operation is an
    // exact fixpoint on its own image.
    Eigen::VectorXd mod_region(const Eigen::VectorXd& x, RegionKind kind) const {
        check_dim_(x);
        if (kind == RegionKind::Voronoi) {
            const auto q = nearest_coords(x);
            if (all_zero_(q)) return x;
            return x - point_at(q);
        }
        const Eigen::VectorXd u = inverse_ * x;
        std::vector<long long> k(static_cast<std::size_t>(n_), 0);
        bool reduced = true;
        for (int i = 0; i < n_; ++i) {
            const double rounded = std::nearbyint(u(i));
            long long ki;
            if (std::abs(u(i) - rounded) <= kIntegralityTol) {
                ki = static_cast<long long>(rounded);  // snap near-integer coords
            } else {
                ki = static_cast<long long>(std::floor(u(i)));
            }
            k[static_cast<std::size_t>(i)] = ki;
            if (ki != 0) reduced = false;
        }
        if (reduced) return x;
        return x - point_at(k);
    }

    // Basis coordinates of x (columns of B as the frame).
    Eigen::VectorXd coords_of(const Eigen::VectorXd& x) const {
        check_dim_(x);
        return inverse_ * x;
    }

    // Voronoi coset leader of (B u) + m Lambda as integer basis coordinates:
    // u - m * Q_{m Lambda}(B u). Computed entirely from integers and single
    // correctly-rounded divisions, so structural ties (lattice points exactly
    // on the boundary of the scaled Voronoi region, unavoidable for even m)
    // resolve to a pure function of the input coset. The continuous-input
    // decoder cannot provide that: its scale roundings perturb exact ties.
    std::vector<long long> voronoi_leader_coords(const std::vector<long long>& u,
                                                 int m) const {
        if (m < 2) throw ConfigError("coset leader requires an integer scale >= 2");
        const int n = n_;
        std::vector<long long> w(static_cast<std::size_t>(n), 0);
        switch (family_) {
            case LatticeFamily::Zn: {
                for (int i = 0; i < n; ++i) {
                    const double y = static_cast<double>(u[static_cast<std::size_t>(i)]) / m;
                    w[static_cast<std::size_t>(i)] = static_cast<long long>(std::nearbyint(y));
                }
                break;
            }
            case LatticeFamily::Dn: {
                // ambient integer coordinates of B u
                std::vector<long long> a(static_cast<std::size_t>(n), 0);
                long long head = 2 * u[0];
                for (int i = 1; i < n; ++i) {
                    head += u[static_cast<std::size_t>(i)];
                    a[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)];
                }
                a[0] = head;
                Eigen::VectorXd y(n);
                for (int i = 0; i < n; ++i) {
                    y(i) = static_cast<double>(a[static_cast<std::size_t>(i)]) / m;
                }
                w = dn_coords_from_integer_(decode_dn_integer_(y));
                break;
            }
            case LatticeFamily::E8: {
                // doubled ambient coordinates stay integral (the basis has
                // half-integer entries); the unscaled basis entries are dyadic
                // so basis_ / scale_ recovers them exactly
                Eigen::VectorXd uu(8);
                for (int i = 0; i < 8; ++i) uu(i) = static_cast<double>(u[static_cast<std::size_t>(i)]);
                const Eigen::VectorXd amb2 = 2.0 * (basis_ / scale_) * uu;
                Eigen::VectorXd y(8);
                for (int i = 0; i < 8; ++i) {
                    const long long a2 = static_cast<long long>(std::nearbyint(amb2(i)));
                    y(i) = static_cast<double>(a2) / (2 * m);
                }
                const auto qa = decode_dn_integer_(y);
                Eigen::VectorXd shifted = y;
                for (int i = 0; i < 8; ++i) shifted(i) -= 0.5;
                const auto qb = decode_dn_integer_(shifted);
                double da = 0.0, db = 0.0;
                for (int i = 0; i < 8; ++i) {
                    const double ea = y(i) - static_cast<double>(qa[static_cast<std::size_t>(i)]);
                    const double eb = y(i) - (static_cast<double>(qb[static_cast<std::size_t>(i)]) + 0.5);
                    da += ea * ea;
                    db += eb * eb;
                }
                Eigen::VectorXd q(8);
                if (da <= db) {
                    for (int i = 0; i < 8; ++i) q(i) = static_cast<double>(qa[static_cast<std::size_t>(i)]);
                } else {
                    for (int i = 0; i < 8; ++i) q(i) = static_cast<double>(qb[static_cast<std::size_t>(i)]) + 0.5;
                }
                const Eigen::VectorXd wv = (basis_ / scale_).inverse() * q;
                for (int i = 0; i < 8; ++i) {
                    w[static_cast<std::size_t>(i)] = static_cast<long long>(std::nearbyint(wv(i)));
                }
                break;
            }
            case LatticeFamily::Custom: {
                Eigen::VectorXd y(n);
                for (int i = 0; i < n; ++i) {
                    y(i) = static_cast<double>(u[static_cast<std::size_t>(i)]) / m;
                }
                w = enumerator().closest(basis_ * y);
                break;
            }
        }
        std::vector<long long> leader(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            leader[static_cast<std::size_t>(i)] =
                u[static_cast<std::size_t>(i)] - static_cast<long long>(m) * w[static_cast<std::size_t>(i)];
        }
        return leader;
    }

    // Integer basis coordinates of a lattice point; rejects off-lattice input.
    std::vector<long long> lattice_coords(const Eigen::VectorXd& point) const {
        const Eigen::VectorXd u = coords_of(point);
        std::vector<long long> out(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            const double rounded = std::nearbyint(u(i));
            if (std::abs(u(i) - rounded) > kIntegralityTol) {
                throw ConfigError("point is not on the lattice (coordinate " +
                                  std::to_string(i) + " deviates by " +
                                  std::to_string(std::abs(u(i) - rounded)) + ")");
            }
            out[static_cast<std::size_t>(i)] = static_cast<long long>(rounded);
        }
        return out;
    }

private:
    LatticeBasis(Eigen::MatrixXd basis, Decoder decoder, LatticeFamily family,
                 double scale, std::string name)
        : n_(static_cast<int>(basis.cols())),
          basis_(std::move(basis)),
          decoder_(decoder),
          family_(family),
          scale_(scale),
          name_(std::move(name)) {
        if (basis_.rows() != basis_.cols() || n_ < 1) {
            throw ConfigError("basis must be a square n x n matrix, n >= 1");
        }
        const double det = basis_.determinant();
        volume_ = std::abs(det);
        double col_scale = 0.0;
        for (int j = 0; j < n_; ++j) col_scale = std::max(col_scale, basis_.col(j).norm());
        if (!(volume_ > 1e-12 * std::pow(col_scale, n_))) {
            throw ConfigError("singular basis: columns must be linearly independent");
        }
        inverse_ = basis_.inverse();
        if (decoder_ == Decoder::Enumeration && n_ > kEnumerationDimensionCap) {
            throw ConfigError("enumeration decoder limited to n <= 12");
        }
        if (decoder_ == Decoder::CoordinateWise) {
            // exact only when basis columns are orthogonal
            Eigen::MatrixXd gram = basis_.transpose() * basis_;
            for (int i = 0; i < n_; ++i) {
                for (int j = 0; j < n_; ++j) {
                    if (i != j && std::abs(gram(i, j)) > 1e-12 * gram(i, i)) {
                        throw ConfigError(
                            "coordinate-wise decoder requires orthogonal basis columns");
                    }
                }
            }
        }
        if (decoder_ == Decoder::DnFast && family_ != LatticeFamily::Dn) {
            throw ConfigError("DnFast decoder only applies to the Dn family");
        }
        if (decoder_ == Decoder::E8Fast && family_ != LatticeFamily::E8) {
            throw ConfigError("E8Fast decoder only applies to the E8 family");
        }
    }

    static void require_dim_(int n) {
        if (n < 1 || n > 64) throw ConfigError("lattice dimension must be in [1, 64]");
    }

    void check_dim_(const Eigen::VectorXd& x) const {
        if (x.size() != n_) {
            throw ConfigError("dimension mismatch: expected " + std::to_string(n_) +
                              ", got " + std::to_string(x.size()));
        }
    }

    static bool all_zero_(const std::vector<long long>& v) {
        for (auto c : v) {
            if (c != 0) return false;
        }
        return true;
    }

    std::vector<long long> nearest_coordinate_wise_(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd u = inverse_ * x;
        std::vector<long long> out(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            out[static_cast<std::size_t>(i)] = static_cast<long long>(std::nearbyint(u(i)));
        }
        return out;
    }

    // Conway-Sloane round-and-repair for D_n: round every coordinate, and if
    // the coordinate sum is odd, re-round the worst coordinate the other way.
    std::vector<long long> decode_dn_integer_(const Eigen::VectorXd& y) const {
        std::vector<long long> a(static_cast<std::size_t>(n_));
        long long sum = 0;
        int worst = 0;
        double worst_err = -1.0;
        for (int i = 0; i < n_; ++i) {
            const double rounded = std::nearbyint(y(i));
            a[static_cast<std::size_t>(i)] = static_cast<long long>(rounded);
            sum += a[static_cast<std::size_t>(i)];
            const double err = std::abs(y(i) - rounded);
            if (err > worst_err) {
                worst_err = err;
                worst = i;
            }
        }
        if (sum % 2 != 0) {
            const double r = y(worst) - static_cast<double>(a[static_cast<std::size_t>(worst)]);
            a[static_cast<std::size_t>(worst)] += (r >= 0.0) ? 1 : -1;
        }
        return a;
    }

    std::vector<long long> dn_coords_from_integer_(const std::vector<long long>& a) const {
        // basis columns: 2e_1, e_1+e_2, ..., e_1+e_n
        std::vector<long long> u(static_cast<std::size_t>(n_));
        long long tail = 0;
        for (int i = 1; i < n_; ++i) {
            u[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)];
            tail += a[static_cast<std::size_t>(i)];
        }
        u[0] = (a[0] - tail) / 2;
        return u;
    }

    std::vector<long long> nearest_dn_(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd y = x / scale_;
        return dn_coords_from_integer_(decode_dn_integer_(y));
    }

    std::vector<long long> nearest_e8_(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd y = x / scale_;
        // best of the D8 coset and the D8 + (1/2,...,1/2) coset
        const auto a = decode_dn_integer_(y);
        Eigen::VectorXd shifted = y;
        for (int i = 0; i < 8; ++i) shifted(i) -= 0.5;
        const auto b = decode_dn_integer_(shifted);
        double da = 0.0;
        double db = 0.0;
        for (int i = 0; i < 8; ++i) {
            const double ea = y(i) - static_cast<double>(a[static_cast<std::size_t>(i)]);
            const double eb = y(i) - (static_cast<double>(b[static_cast<std::size_t>(i)]) + 0.5);
            da += ea * ea;
            db += eb * eb;
        }
        Eigen::VectorXd point(8);
        if (da <= db) {
            for (int i = 0; i < 8; ++i) point(i) = static_cast<double>(a[static_cast<std::size_t>(i)]);
        } else {
            for (int i = 0; i < 8; ++i) point(i) = static_cast<double>(b[static_cast<std::size_t>(i)]) + 0.5;
        }
        // back to basis coordinates (exact integers for genuine E8 points)
        Eigen::VectorXd u = inverse_ * (point * scale_);
        std::vector<long long> out(8);
        for (int i = 0; i < 8; ++i) {
            out[static_cast<std::size_t>(i)] = static_cast<long long>(std::nearbyint(u(i)));
        }
        return out;
    }

    int n_;
    Eigen::MatrixXd basis_;
    Eigen::MatrixXd inverse_;
    double volume_ = 0.0;
    Decoder decoder_;
    LatticeFamily family_;
    double scale_;
    std::string name_;
    mutable std::shared_ptr<SphereEnumerator> enumerator_;
    mutable std::optional<double> cached_min_norm_;
};

// --- coset arithmetic for self-similar quotients Lambda / m Lambda ---------

// Validates that `coarse` is an integer multiple of `fine` and returns m.
inline int quotient_ratio(const LatticeBasis& fine, const LatticeBasis& coarse) {
    if (fine.dimension() != coarse.dimension()) {
        throw ConfigError("coset lattices must share a dimension");
    }
    const int n = fine.dimension();
    const double ratio = std::pow(coarse.volume() / fine.volume(), 1.0 / n);
    const int m = static_cast<int>(std::llround(ratio));
    if (m < 2 || std::abs(ratio - m) > 1e-9) {
        throw ConfigError("coarse lattice must be an integer scaling (m >= 2) of the fine lattice");
    }
    const double scale = fine.basis().cwiseAbs().maxCoeff();
    if (((coarse.basis() - m * fine.basis()).cwiseAbs().maxCoeff()) > 1e-12 * m * scale) {
        throw ConfigError("coarse basis is not m times the fine basis");
    }
    return m;
}

// Mixed-radix label of the coset of `point` in Lambda_fine / Lambda_coarse:
// the n base-m digits of the fine coordinates, little-endian on coordinates.
inline std::uint64_t coset_index(const Eigen::VectorXd& point,
                                 const LatticeBasis& fine,
                                 const LatticeBasis& coarse) {
    const int m = quotient_ratio(fine, coarse);
    const auto u = fine.lattice_coords(point);
    std::uint64_t index = 0;
    std::uint64_t weight = 1;
    for (int i = 0; i < fine.dimension(); ++i) {
        const long long digit = ((u[static_cast<std::size_t>(i)] % m) + m) % m;
        index += static_cast<std::uint64_t>(digit) * weight;
        if (i + 1 < fine.dimension()) {
            if (weight > (~std::uint64_t{0}) / static_cast<std::uint64_t>(m) / 2) {
                throw ConfigError("coset index overflows 64 bits");
            }
            weight *= static_cast<std::uint64_t>(m);
        }
    }
    return index;
}

inline std::vector<long long> coset_digits(std::uint64_t index, int n, int m) {
    std::vector<long long> digits(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        digits[static_cast<std::size_t>(i)] = static_cast<long long>(index % static_cast<std::uint64_t>(m));
        index /= static_cast<std::uint64_t>(m);
    }
    if (index != 0) throw ConfigError("coset index out of range");
    return digits;
}

// Canonical representative of coset `index`. The parallelepiped leader has
// fine coordinates in [0, m)^n; the Voronoi leader reduces it mod V(coarse)
// through the exact integer path so boundary cosets resolve consistently.
inline Eigen::VectorXd coset_leader(std::uint64_t index, const LatticeBasis& fine,
                                    const LatticeBasis& coarse,
                                    RegionKind kind = RegionKind::Parallelepiped) {
    const int m = quotient_ratio(fine, coarse);
    const auto digits = coset_digits(index, fine.dimension(), m);
    if (kind == RegionKind::Parallelepiped) return fine.point_at(digits);
    return fine.point_at(fine.voronoi_leader_coords(digits, m));
}

// --- nested chain Lambda1 > Lambda2 > Lambda3 -------------------------------

// Self-similar chain built by integer scalings of one base lattice:
// Lambda1 = base, Lambda2 = scale2 * base, Lambda3 = scale2 * scale3 * base.
class NestedChain {
public:
    NestedChain(LatticeBasis base, int scale2, int scale3,
                RegionKind key_region = RegionKind::Parallelepiped)
        : lambda1_(std::move(base)),
          lambda2_(lambda1_.scaled(scale2)),
          lambda3_(lambda2_.scaled(scale3)),
          scale2_(scale2),
          scale3_(scale3),
          key_region_(key_region) {
        if (scale2 < 2 || scale3 < 2) {
            throw ConfigError("chain scales must be integers >= 2");
        }
        const int n = lambda1_.dimension();
        if (n * std::log2(static_cast<double>(std::max(scale2, scale3))) > 62.0) {
            throw ConfigError("coset cardinality overflows 64 bits");
        }
    }

    const LatticeBasis& lambda1() const { return lambda1_; }
    const LatticeBasis& lambda2() const { return lambda2_; }
    const LatticeBasis& lambda3() const { return lambda3_; }
    int scale2() const { return scale2_; }
    int scale3() const { return scale3_; }
    RegionKind key_region() const { return key_region_; }
    int dimension() const { return lambda1_.dimension(); }

    double volume1() const { return lambda1_.volume(); }
    double volume2() const { return lambda2_.volume(); }
    double volume3() const { return lambda3_.volume(); }

    std::uint64_t key_cardinality() const { return ipow_(scale3_); }
    std::uint64_t public_cardinality() const { return ipow_(scale2_); }

    // nats per dimension
    double key_rate() const { return std::log(static_cast<double>(scale3_)); }
    double public_rate() const { return std::log(static_cast<double>(scale2_)); }

private:
    std::uint64_t ipow_(int m) const {
        std::uint64_t v = 1;
        for (int i = 0; i < dimension(); ++i) v *= static_cast<std::uint64_t>(m);
        return v;
    }

    LatticeBasis lambda1_;
    LatticeBasis lambda2_;
    LatticeBasis lambda3_;
    int scale2_;
    int scale3_;
    RegionKind key_region_;
};

// --- normalized second moment ----------------------------------------------

struct SecondMomentEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::uint64_t samples = 0;
};

// Monte-Carlo G(Lambda). A uniform draw on the fundamental parallelepiped
// reduced mod V(Lambda) is exactly uniform on the Voronoi region, so the
// estimator is unbiased.
inline SecondMomentEstimate second_moment_estimate(const LatticeBasis& lat,
                                                   std::uint64_t samples,
                                                   std::uint64_t seed) {
    if (samples < 10'000) {
        throw ConfigError("second_moment_estimate requires samples >= 1e4");
    }
    const int n = lat.dimension();
    MeanVar acc;
    Eigen::VectorXd frac(n);
    for (std::uint64_t s = 0; s < samples; ++s) {
        Rng rng(seed, s);
        for (int i = 0; i < n; ++i) frac(i) = rng.next_unit();
        const Eigen::VectorXd p = lat.basis() * frac;
        const Eigen::VectorXd reduced = lat.mod_region(p, RegionKind::Voronoi);
        acc.add(reduced.squaredNorm() / n);
    }
    const double norm = lat.volume_pow_2n();
    return {acc.mean() / norm, acc.stderr_of_mean() / norm, samples};
}

// Parses family names used in configs: "Zn:{n}", "Dn:{n}", "E8".
inline LatticeBasis lattice_from_name(const std::string& name, double scale = 1.0) {
    auto parse_n = [&](std::size_t prefix) {
        try {
            return std::stoi(name.substr(prefix));
        } catch (const std::exception&) {
            throw ConfigError("bad lattice family name: " + name);
        }
    };
    if (name.rfind("Zn:", 0) == 0) return LatticeBasis::zn(parse_n(3), scale);
    if (name.rfind("Dn:", 0) == 0) return LatticeBasis::dn(parse_n(3), scale);
    if (name == "E8") return LatticeBasis::e8(scale);
    throw ConfigError("unknown lattice family: " + name +
                      " (expected Zn:{n}, Dn:{n}, E8, or custom)");
}

}  // namespace latkey
