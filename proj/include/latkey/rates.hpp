#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include "latkey/errors.hpp"
#include "latkey/lattice.hpp"
#include "latkey/source.hpp"
#include "latkey/theta.hpp"

namespace latkey {

inline constexpr double kIdealSecondMoment = 1.0 / (2.0 * std::numbers::pi * std::numbers::e);

// Closed-form rate bounds. v1_pow is V1^(2/n), the per-dimension squared
// volume scale of the quantization lattice; g is the normalized second
// moment used for the quantization-noise term.
struct RateBounds {
    double r_k_bound = 0.0;    // (1/2) ln(sigma2^2 / (g V1^(2/n) + sigma1^2)) - 1/2
    double r_p_bound = 0.0;    // (1/2) ln(1 + 2 pi e sigma1^2 / V1^(2/n))
    double quasi_optimal = 0.0;  // (1/2) ln(sigma2^2 / sigma1^2) - 1/2
    double upper_bound = 0.0;    // I(X;Y) - I(X;Z) = (1/2) ln(sigma2^2 / sigma1^2)
    double gap = 0.0;            // upper_bound - r_k_bound -> 1/2 as V1 -> 0
};

inline RateBounds rate_bounds(const SourceParams& p, double v1_pow,
                              double g = kIdealSecondMoment) {
    if (!(v1_pow > 0.0)) throw ConfigError("V1^(2/n) must be positive");
    const double s1 = p.sigma1();
    const double s2 = p.sigma2();
    RateBounds b;
    b.upper_bound = 0.5 * std::log(s2 * s2 / (s1 * s1));
    b.quasi_optimal = b.upper_bound - 0.5;
    b.r_k_bound = 0.5 * std::log(s2 * s2 / (g * v1_pow + s1 * s1)) - 0.5;
    b.r_p_bound = 0.5 * std::log1p(2.0 * std::numbers::pi * std::numbers::e * s1 * s1 / v1_pow);
    b.gap = b.upper_bound - b.r_k_bound;
    return b;
}

struct RateReport {
    double r_k = 0.0;  // realized (1/n) ln(V3/V2), nats per dimension
    double r_p = 0.0;  // realized (1/n) ln(V2/V1)
    RateBounds bounds;
    bool awgn_condition = false;     // V2^(2/n) / (g V1^(2/n) + sigma1^2) > 2 pi e
    bool secrecy_condition = false;  // V3^(2/n) / sigma2^2 < 2 pi
    bool degraded = false;
    bool feasible = false;  // upper bound positive and r_k_bound positive
    double g_lambda1 = kIdealSecondMoment;
    double v1_pow = 0.0;
    double v2_pow = 0.0;
    double v3_pow = 0.0;
};

inline RateReport rate_report(const NestedChain& chain, const SourceParams& p,
                              double g_lambda1 = kIdealSecondMoment) {
    RateReport r;
    r.g_lambda1 = g_lambda1;
    r.v1_pow = chain.lambda1().volume_pow_2n();
    r.v2_pow = chain.lambda2().volume_pow_2n();
    r.v3_pow = chain.lambda3().volume_pow_2n();
    r.r_k = chain.key_rate();
    r.r_p = chain.public_rate();
    r.bounds = rate_bounds(p, r.v1_pow, g_lambda1);
    const double s1 = p.sigma1();
    const double s2 = p.sigma2();
    r.awgn_condition = r.v2_pow / (g_lambda1 * r.v1_pow + s1 * s1) >
                       2.0 * std::numbers::pi * std::numbers::e;
    r.secrecy_condition = r.v3_pow / (s2 * s2) < 2.0 * std::numbers::pi;
    r.degraded = p.degraded();
    r.feasible = r.degraded && r.bounds.r_k_bound > 0.0;
    return r;
}

// --- chain calibration -------------------------------------------------------

struct CalibrateOptions {
    double eq9_margin = 1.0;   // require lhs > margin * 2 pi e (g V1^(2/n) + sigma1^2)
    int max_scale2 = 16;
    int max_scale3 = 64;
    double scale_cap = 1e4;    // top bracket for the flatness bisection
    // second-moment source for the quantization term: exact 1/12 for Zn,
    // the ideal constant otherwise unless mc_samples > 0
    std::uint64_t mc_samples = 0;
    std::uint64_t seed = 1;
    ThetaOptions theta;
};

struct CalibrationResult {
    NestedChain chain;
    double base_scale = 0.0;
    double lambda3_scale = 0.0;     // base_scale * scale2 * scale3
    double achieved_epsilon = 0.0;  // flatness of Lambda3 at sigma2
    double eq9_ratio = 0.0;         // lhs / (2 pi e (g V1^(2/n) + sigma1^2))
    double g_lambda1 = 0.0;
    RateReport rates;
};

// Searches integer (scale2, scale3) and a real base scale so that the
// extractor lattice meets the flatness target at sigma2, the noise-margin
// predicate holds for Lambda2, and the key rate ln(scale3) is maximal.
// Ties prefer the smaller public rate.
inline CalibrationResult chain_calibrate(const SourceParams& params,
                                         const std::string& family, int n,
                                         double target_epsilon,
                                         const CalibrateOptions& opts = {}) {
    const auto report = degradedness_report(params);
    if (!(report.mi_xy > report.mi_xz)) {
        throw InfeasibleError(
            "calibration infeasible: upperBound <= 0 (source is not degraded)");
    }
    const LatticeBasis unit = [&]() {
        if (family == "Zn") return LatticeBasis::zn(n);
        if (family == "Dn") return LatticeBasis::dn(n);
        if (family == "E8") {
            if (n != 8) throw ConfigError("E8 calibration requires n = 8");
            return LatticeBasis::e8();
        }
        return lattice_from_name(family);
    }();

    double g = kIdealSecondMoment;
    if (unit.family() == LatticeFamily::Zn) {
        g = 1.0 / 12.0;  // exact for rectangular Voronoi cells
    } else if (opts.mc_samples > 0) {
        g = second_moment_estimate(unit, opts.mc_samples, opts.seed).value;
    }

    const double sigma1 = params.sigma1();
    const double sigma2 = params.sigma2();
    const double t = scale_for_flatness(unit, sigma2, target_epsilon,
                                        opts.scale_cap, opts.theta);
    const double vb_pow = unit.volume_pow_2n();
    const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;

    int best_s2 = 0;
    int best_s3 = 0;
    for (int s2 = 2; s2 <= opts.max_scale2; ++s2) {
        for (int s3 = opts.max_scale3; s3 >= 2; --s3) {
            if (s3 <= best_s3) break;
            const double c2_pow = (t / s3) * (t / s3) * vb_pow;   // V2^(2/n)
            const double c1_pow = c2_pow / (static_cast<double>(s2) * s2);
            if (c2_pow > opts.eq9_margin * two_pi_e * (g * c1_pow + sigma1 * sigma1)) {
                best_s2 = s2;
                best_s3 = s3;
                break;
            }
        }
    }
    if (best_s3 == 0) {
        throw InfeasibleError(
            "calibration infeasible at n=" + std::to_string(n) +
            ": binding constraint is the noise-margin predicate (no scale2 <= " +
            std::to_string(opts.max_scale2) + " admits scale3 >= 2)");
    }

    const double base_scale = t / (static_cast<double>(best_s2) * best_s3);
    CalibrationResult out{
        NestedChain(unit.scaled(base_scale), best_s2, best_s3),
        base_scale,
        t,
        0.0,
        0.0,
        g,
        {}};
    out.achieved_epsilon =
        flatness_auto(out.chain.lambda3(), sigma2, opts.theta).epsilon;
    const double v2_pow = out.chain.lambda2().volume_pow_2n();
    const double v1_pow = out.chain.lambda1().volume_pow_2n();
    out.eq9_ratio = v2_pow / (two_pi_e * (g * v1_pow + sigma1 * sigma1));
    out.rates = rate_report(out.chain, params, g);
    return out;
}

}  // namespace latkey
