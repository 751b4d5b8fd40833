#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "latkey/errors.hpp"
#include "latkey/lattice.hpp"
#include "latkey/stats.hpp"

namespace latkey {

// Convention used throughout: Theta(tau) = sum over lattice points of
// exp(-pi * tau * ||v||^2). The periodic Gaussian density at zero is then
// (2 pi sigma^2)^(-n/2) * Theta(1 / (2 pi sigma^2)).

struct ThetaOptions {
    double target_tail_rel = 1e-12;        // certified remainder, relative
    std::uint64_t budget = 10'000'000;     // lattice points enumerated, max
};

struct ThetaResult {
    double value = 0.0;
    double tail_bound = 0.0;   // absolute bound on the dropped remainder
    double radius = 0.0;       // truncation radius actually used
    std::uint64_t points = 0;  // points in the partial sum (0 for factored paths)
};

namespace detail {

inline double ball_volume(int n, double radius) {
    return std::pow(std::numbers::pi, n / 2.0) * std::pow(radius, n) /
           std::tgamma(n / 2.0 + 1.0);
}

// Bound on sum_{||v|| > R} exp(-pi tau ||v||^2) via thin shells and a packing
// count: points with norm in [a, a+w) own disjoint balls of radius rho inside
// the padded shell, so their number is at most vol(padded shell) /
// vol(ball_rho), and each contributes at most exp(-pi tau a^2). Shell width
// rho/2 keeps the within-shell exponent slack small.
inline double theta_tail_bound(int n, double rho, double tau, double radius) {
    const double w = rho / 2.0;
    double acc = 0.0;
    for (long j = 0; j < 4'000'000; ++j) {
        const double a = radius + j * w;
        const double outer = std::pow(a + w + rho, n);
        const double inner = std::pow(std::max(a - rho, 0.0), n);
        const double count = (outer - inner) / std::pow(rho, n);
        const double term = count * std::exp(-std::numbers::pi * tau * a * a);
        acc += term;
        if (term == 0.0 || (j > 8 && term < 1e-8 * acc)) return acc;
    }
    return std::numeric_limits<double>::infinity();
}

// One-dimensional theta factor for scale-c Z: 1 + 2 sum exp(-pi tau c^2 k^2),
// with a geometric-majorant remainder bound.
inline ThetaResult theta_z1(double c2tau, double target_abs) {
    if (!(c2tau > 0.0)) throw ConfigError("theta series requires tau > 0");
    const double a = std::numbers::pi * c2tau;
    KahanSum sum;
    sum.add(1.0);
    std::uint64_t k = 0;
    double tail = std::numeric_limits<double>::infinity();
    while (true) {
        ++k;
        if (k > 100'000'000ull) {
            throw NumericalGuardError("1-D theta summation budget exceeded");
        }
        sum.add(2.0 * std::exp(-a * static_cast<double>(k) * static_cast<double>(k)));
        const double head = std::exp(-a * static_cast<double>(k + 1) * static_cast<double>(k + 1));
        const double ratio = std::exp(-a * static_cast<double>(2 * k + 3));
        tail = 2.0 * head / (1.0 - std::min(ratio, 1.0 - 1e-16));
        if (tail <= target_abs) break;
    }
    return {sum.value(), tail, static_cast<double>(k), 0};
}

}  // namespace detail

// Truncated theta series with a certified tail. For the Zn family the sum
// factors into 1-D series; everything else is sphere enumeration with the
// packing-shell remainder bound.
inline ThetaResult theta_series(const LatticeBasis& lat, double tau,
                                const ThetaOptions& opts = {}) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ConfigError("theta series requires tau > 0");
    }
    const int n = lat.dimension();

    if (lat.family() == LatticeFamily::Zn) {
        // per-factor target so that the n-th power stays within the relative goal
        const double per_factor =
            std::pow(1.0 + opts.target_tail_rel, 1.0 / n) - 1.0;
        const auto f = detail::theta_z1(lat.scale() * lat.scale() * tau, per_factor);
        const double value = std::pow(f.value, n);
        // (S+t)^n - S^n <= n t (S+t)^(n-1), computed without cancellation
        const double tail =
            n * f.tail_bound * std::pow(f.value + f.tail_bound, n - 1);
        return {value, tail, f.radius * lat.scale(), 0};
    }

    const double lambda_min = lat.minimum_norm();
    const double rho = lambda_min / 2.0;
    // rigorous lower bound on the value: theta >= 1 (origin term) and, by
    // Poisson summation with Theta_dual >= 1, theta >= tau^(-n/2) / V
    const double theta_floor =
        std::max(1.0, std::pow(tau, -n / 2.0) / lat.volume());
    const double target_abs = opts.target_tail_rel * theta_floor;

    double radius = lambda_min;
    while (detail::theta_tail_bound(n, rho, tau, radius) > target_abs) {
        radius += lambda_min / 8.0;
        if (radius > 1e9 * lambda_min) {
            throw NumericalGuardError("theta truncation radius diverged");
        }
    }
    const double predicted = detail::ball_volume(n, radius) / lat.volume();
    if (predicted > 1.5 * static_cast<double>(opts.budget)) {
        throw NumericalGuardError(
            "enumeration budget exceeded before reaching target tail (needs about " +
            std::to_string(static_cast<std::uint64_t>(predicted)) + " points)");
    }

    KahanSum sum;
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
    const double pi_tau = std::numbers::pi * tau;
    const std::uint64_t points = lat.enumerator().for_each_in_ball(
        origin, radius, opts.budget,
        [&](const long long*, double dist2) { sum.add(std::exp(-pi_tau * dist2)); });
    return {sum.value(), detail::theta_tail_bound(n, rho, tau, radius), radius, points};
}

// Same truncated sum without the origin term. Values far below one ulp of 1
// would vanish inside theta_series; summing only nonzero points keeps them.
inline ThetaResult theta_series_excluding_origin(const LatticeBasis& lat, double tau,
                                                 const ThetaOptions& opts = {}) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ConfigError("theta series requires tau > 0");
    }
    const int n = lat.dimension();
    const double lambda_min = lat.minimum_norm();
    const double rho = lambda_min / 2.0;
    const double theta_floor =
        std::max(1.0, std::pow(tau, -n / 2.0) / lat.volume());
    const double target_abs = opts.target_tail_rel * theta_floor;

    double radius = lambda_min;
    while (detail::theta_tail_bound(n, rho, tau, radius) > target_abs) {
        radius += lambda_min / 8.0;
        if (radius > 1e9 * lambda_min) {
            throw NumericalGuardError("theta truncation radius diverged");
        }
    }
    const double predicted = detail::ball_volume(n, radius) / lat.volume();
    if (predicted > 1.5 * static_cast<double>(opts.budget)) {
        throw NumericalGuardError(
            "enumeration budget exceeded before reaching target tail (needs about " +
            std::to_string(static_cast<std::uint64_t>(predicted)) + " points)");
    }

    KahanSum sum;
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
    const double pi_tau = std::numbers::pi * tau;
    const std::uint64_t points = lat.enumerator().for_each_in_ball(
        origin, radius, opts.budget, [&](const long long*, double dist2) {
            if (dist2 != 0.0) sum.add(std::exp(-pi_tau * dist2));
        });
    return {sum.value(), detail::theta_tail_bound(n, rho, tau, radius), radius, points};
}

enum class FlatnessMethod { ThetaIdentity, DirectGrid, DualPoisson };

inline const char* to_string(FlatnessMethod m) {
    switch (m) {
        case FlatnessMethod::ThetaIdentity: return "theta_identity";
        case FlatnessMethod::DirectGrid: return "direct_grid";
        case FlatnessMethod::DualPoisson: return "dual_poisson";
    }
    return "?";
}

struct FlatnessResult {
    double epsilon = 0.0;
    double sigma = 0.0;
    double vnr = 0.0;               // V^(2/n) / sigma^2
    double truncation_radius = 0.0;
    double tail_bound = 0.0;
    FlatnessMethod method = FlatnessMethod::ThetaIdentity;
};

// epsilon(sigma) = (vnr / 2pi)^(n/2) * Theta(1/(2 pi sigma^2)) - 1.
// Tiny negative round-off is clamped: the exact value is a supremum of
// |density ratio - 1| and cannot be negative.
inline FlatnessResult flatness_factor(const LatticeBasis& lat, double sigma,
                                      const ThetaOptions& opts = {}) {
    if (!(sigma > 0.0)) throw ConfigError("flatness factor requires sigma > 0");
    const int n = lat.dimension();
    const double tau = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    const auto theta = theta_series(lat, tau, opts);
    const double vnr = lat.volume_pow_2n() / (sigma * sigma);
    const double prefactor = std::pow(vnr / (2.0 * std::numbers::pi), n / 2.0);
    const double raw = prefactor * theta.value - 1.0;
    const double tail = prefactor * theta.tail_bound;
    if (!std::isfinite(raw)) {
        throw NumericalGuardError("flatness factor overflowed");
    }
    FlatnessResult out;
    out.epsilon = std::max(0.0, raw);
    out.sigma = sigma;
    out.vnr = vnr;
    out.truncation_radius = theta.radius;
    out.tail_bound = tail;
    out.method = FlatnessMethod::ThetaIdentity;
    return out;
}

// Poisson-route oracle: epsilon(sigma) = Theta_dual(2 pi sigma^2) - 1.
// Computed entirely on the dual basis by generic enumeration, independent of
// the primal evaluation path.
inline FlatnessResult flatness_dual(const LatticeBasis& lat, double sigma,
                                    const ThetaOptions& opts = {}) {
    if (!(sigma > 0.0)) throw ConfigError("flatness factor requires sigma > 0");
    const auto dual = lat.dual();
    const double tau = 2.0 * std::numbers::pi * sigma * sigma;
    // Theta_dual - 1 summed directly over nonzero points: in the deep flat
    // regime the factor is far below one ulp of the origin term
    const auto theta = theta_series_excluding_origin(dual, tau, opts);
    FlatnessResult out;
    out.epsilon = std::max(0.0, theta.value);
    out.sigma = sigma;
    out.vnr = lat.volume_pow_2n() / (sigma * sigma);
    out.truncation_radius = theta.radius;
    out.tail_bound = theta.tail_bound;
    out.method = FlatnessMethod::DualPoisson;
    return out;
}

struct DirectFlatnessResult {
    double epsilon = 0.0;
    double tail_bound = 0.0;
    Eigen::VectorXd argmax_fraction;  // basis coordinates in [0,1)^n of the maximizer
};

// Grid oracle over the fundamental parallelepiped: max |V f_sigma(x) - 1|
// from the truncated lattice sum of the periodic Gaussian. n <= 2 only.
inline DirectFlatnessResult flatness_direct(const LatticeBasis& lat, double sigma,
                                            int grid_points_per_dim,
                                            const ThetaOptions& opts = {}) {
    const int n = lat.dimension();
    if (n > 2) throw ConfigError("flatness_direct grid oracle requires n <= 2");
    if (grid_points_per_dim < 64) {
        throw ConfigError("flatness_direct requires gridPointsPerDim >= 64");
    }
    if (!(sigma > 0.0)) throw ConfigError("flatness factor requires sigma > 0");

    const double tau = 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    const double lambda_min = lat.minimum_norm();
    const double rho = lambda_min / 2.0;
    // region diameter bound: x = B f with f in [0,1)^n
    double region_norm = 0.0;
    for (int j = 0; j < n; ++j) region_norm += lat.basis().col(j).norm();
    // nearest lattice point within the region is at most region_norm away
    const double partial_floor =
        std::exp(-std::numbers::pi * tau * region_norm * region_norm);
    const double target_abs = opts.target_tail_rel * partial_floor;

    double r_needed = lambda_min;
    while (detail::theta_tail_bound(n, rho, tau, r_needed) > target_abs) {
        r_needed += lambda_min / 2.0;
        if (r_needed > 1e9 * lambda_min) {
            throw NumericalGuardError("density truncation radius diverged");
        }
    }
    const double r_list = r_needed + region_norm;

    std::vector<Eigen::VectorXd> points;
    lat.enumerator().for_each_in_ball(
        Eigen::VectorXd::Zero(n), r_list, opts.budget,
        [&](const long long* u, double) {
            Eigen::VectorXd coords(n);
            for (int i = 0; i < n; ++i) coords(i) = static_cast<double>(u[i]);
            points.push_back(lat.basis() * coords);
        });

    const double norm_const =
        std::pow(2.0 * std::numbers::pi * sigma * sigma, -n / 2.0);
    const double volume = lat.volume();
    const int g = grid_points_per_dim;
    const long total = n == 1 ? g : static_cast<long>(g) * g;

    DirectFlatnessResult out;
    out.argmax_fraction = Eigen::VectorXd::Zero(n);
    out.tail_bound =
        volume * norm_const * detail::theta_tail_bound(n, rho, tau, r_needed);
    double max_dev = -1.0;
    Eigen::VectorXd frac(n);
    Eigen::VectorXd x(n);
    for (long idx = 0; idx < total; ++idx) {
        frac(0) = static_cast<double>(idx % g) / g;
        if (n == 2) frac(1) = static_cast<double>(idx / g) / g;
        x = lat.basis() * frac;
        KahanSum sum;
        for (const auto& p : points) {
            sum.add(std::exp(-std::numbers::pi * tau * (x + p).squaredNorm()));
        }
        const double density = norm_const * sum.value();
        const double dev = std::abs(volume * density - 1.0);
        if (dev > max_dev) {
            max_dev = dev;
            out.argmax_fraction = frac;
        }
    }
    out.epsilon = max_dev;
    return out;
}

// Method-switching evaluation for calibration loops: both routes compute the
// same quantity, the cheap side depends on which regime the lattice is in.
inline FlatnessResult flatness_auto(const LatticeBasis& lat, double sigma,
                                    const ThetaOptions& opts = {}) {
    const double vnr = lat.volume_pow_2n() / (sigma * sigma);
    if (lat.family() == LatticeFamily::Zn || vnr >= 2.0 * std::numbers::pi) {
        return flatness_factor(lat, sigma, opts);
    }
    return flatness_dual(lat, sigma, opts);
}

// Largest scale t such that epsilon_{t Lambda}(sigma) <= target. Flatness is
// monotone increasing in the scale, so bisection applies.
inline double scale_for_flatness(const LatticeBasis& unit_lattice, double sigma,
                                 double target_eps, double scale_cap = 1e4,
                                 const ThetaOptions& opts = {}) {
    if (!(target_eps > 0.0)) throw ConfigError("target epsilon must be positive");
    auto eps_at = [&](double t) {
        return flatness_auto(unit_lattice.scaled(t), sigma, opts).epsilon;
    };
    const double beta = std::pow(unit_lattice.volume(), 1.0 / unit_lattice.dimension());
    double lo = 0.05 * sigma / beta;
    while (eps_at(lo) > target_eps) {
        lo *= 0.5;
        if (lo < 1e-9 * sigma / beta) {
            throw InfeasibleError("no scale satisfies the flatness target");
        }
    }
    double hi = lo;
    while (hi < scale_cap && eps_at(hi) <= target_eps) hi *= 2.0;
    if (hi >= scale_cap) return std::min(hi, scale_cap);  // constraint is vacuous
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (eps_at(mid) <= target_eps ? lo : hi) = mid;
    }
    return lo;
}

struct SweepRow {
    std::string family;
    int n = 0;
    double sigma = 0.0;
    double vnr = 0.0;
    double epsilon = 0.0;
    double tail_bound = 0.0;
    FlatnessMethod method = FlatnessMethod::ThetaIdentity;
};

// Flatness versus dimension at a fixed volume-to-noise ratio; each lattice is
// rescaled so gamma = vnr exactly.
inline std::vector<SweepRow> secrecy_sweep(const std::string& family, double sigma,
                                           const std::vector<int>& n_list, double vnr,
                                           const ThetaOptions& opts = {}) {
    if (!(vnr > 0.0)) throw ConfigError("secrecy sweep requires vnr > 0");
    std::vector<SweepRow> rows;
    for (int n : n_list) {
        LatticeBasis unit = [&]() {
            if (family == "Zn") return LatticeBasis::zn(n);
            if (family == "Dn") return LatticeBasis::dn(n);
            if (family == "E8") {
                if (n != 8) throw ConfigError("E8 sweep entries must have n = 8");
                return LatticeBasis::e8();
            }
            return lattice_from_name(family);
        }();
        const double beta = std::pow(unit.volume(), 1.0 / n);
        const double c = sigma * std::sqrt(vnr) / beta;
        const auto fr = flatness_factor(unit.scaled(c), sigma, opts);
        rows.push_back({family, n, sigma, fr.vnr, fr.epsilon, fr.tail_bound, fr.method});
    }
    return rows;
}

}  // namespace latkey
