#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "latkey/errors.hpp"
#include "latkey/lattice.hpp"
#include "latkey/rng.hpp"
#include "latkey/source.hpp"
#include "latkey/stats.hpp"
#include "latkey/theta.hpp"

namespace latkey {

// Evaluator for the lattice-periodic Gaussian f_{sigma,Lambda}(v): the
// Gaussian density summed over all lattice translates, truncated with a
// certified relative tail. Zn-family lattices factor into 1-D sums; other
// lattices go through sphere enumeration around -v.
class PeriodicGaussianDensity {
public:
    PeriodicGaussianDensity(const LatticeBasis& lat, double sigma,
                            double rel_tail = 1e-12,
                            std::uint64_t budget = 10'000'000)
        : lat_(lat),
          sigma_(sigma),
          rel_tail_(rel_tail),
          budget_(budget),
          tau_(1.0 / (2.0 * std::numbers::pi * sigma * sigma)),
          norm_const_(std::pow(2.0 * std::numbers::pi * sigma * sigma,
                               -lat.dimension() / 2.0)) {
        if (!(sigma > 0.0)) throw ConfigError("density requires sigma > 0");
    }

    double operator()(const Eigen::VectorXd& v) const {
        if (lat_.family() == LatticeFamily::Zn) {
            double prod = norm_const_;
            for (int i = 0; i < lat_.dimension(); ++i) {
                prod *= factor_1d_(v(i));
            }
            return prod;
        }
        return generic_(v);
    }

    double sigma() const { return sigma_; }

private:
    // sum_k exp(-(v + c k)^2 / (2 sigma^2)), expanded outward from the
    // closest translate until the geometric remainder bound drops below the
    // relative target on both sides.
    double factor_1d_(double v) const {
        const double c = lat_.scale();
        const double inv2s2 = 1.0 / (2.0 * sigma_ * sigma_);
        const long long k0 = static_cast<long long>(std::nearbyint(-v / c));
        auto term = [&](long long k) {
            const double d = v + c * static_cast<double>(k);
            return std::exp(-d * d * inv2s2);
        };
        KahanSum sum;
        sum.add(term(k0));
        long long span = 0;
        for (;;) {
            ++span;
            if (span > 100'000'000ll) {
                throw NumericalGuardError("1-D density expansion budget exceeded");
            }
            sum.add(term(k0 + span));
            sum.add(term(k0 - span));
            // remainder past the current span, each side geometric
            const double a_right = v + c * static_cast<double>(k0 + span + 1);
            const double a_left = -(v + c * static_cast<double>(k0 - span - 1));
            if (a_right <= 0.0 || a_left <= 0.0) continue;
            const double qr = std::exp(-a_right * c * 2.0 * inv2s2);
            const double ql = std::exp(-a_left * c * 2.0 * inv2s2);
            const double rem = std::exp(-a_right * a_right * inv2s2) / (1.0 - qr) +
                               std::exp(-a_left * a_left * inv2s2) / (1.0 - ql);
            if (rem <= rel_tail_ * sum.value()) break;
        }
        return sum.value();
    }

    double generic_(const Eigen::VectorXd& v) const {
        const int n = lat_.dimension();
        const double lambda_min = lat_.minimum_norm();
        const double rho = lambda_min / 2.0;
        const double d = (v - lat_.nearest_point(v)).norm();
        const double partial_floor = std::exp(-std::numbers::pi * tau_ * d * d);

        double radius =
            d + sigma_ * std::sqrt(2.0 * (std::log(1.0 / rel_tail_) + 4.0 * n)) +
            lambda_min;
        for (int grow = 0;; ++grow) {
            if (detail::theta_tail_bound(n, rho, tau_, radius) <=
                rel_tail_ * partial_floor) {
                break;
            }
            radius *= 1.25;
            if (grow > 200) {
                throw NumericalGuardError("density truncation radius diverged");
            }
        }

        KahanSum sum;
        lat_.enumerator().for_each_in_ball(
            -v, radius, budget_,
            [&](const long long*, double dist2) {
                sum.add(std::exp(-std::numbers::pi * tau_ * dist2));
            });
        return norm_const_ * sum.value();
    }

    const LatticeBasis& lat_;
    double sigma_;
    double rel_tail_;
    std::uint64_t budget_;
    double tau_;
    double norm_const_;
};

namespace detail {

inline void require_in_region(const LatticeBasis& lat, const Eigen::VectorXd& xbar,
                              RegionKind region) {
    const Eigen::VectorXd reduced = lat.mod_region(xbar, region);
    const double scale = 1.0 + xbar.norm();
    if ((reduced - xbar).norm() > 1e-9 * scale) {
        throw ConfigError("xbar is not inside the chosen fundamental region");
    }
}

}  // namespace detail

// Conditional density of the reduced source given the eavesdropper sample:
// f_{sigma2,Lambda}(xbar - coeff_z * z) on the fundamental region.
inline double conditional_density(const Eigen::VectorXd& xbar,
                                  const Eigen::VectorXd& z, const LatticeBasis& lat,
                                  const SourceParams& params,
                                  RegionKind region = RegionKind::Parallelepiped) {
    detail::require_in_region(lat, xbar, region);
    PeriodicGaussianDensity density(lat, params.sigma2());
    return density(xbar - params.coeff_z() * z);
}

// Marginal density of the reduced source: f_{sigma_x,Lambda}(xbar).
inline double marginal_density(const Eigen::VectorXd& xbar, const LatticeBasis& lat,
                               const SourceParams& params,
                               RegionKind region = RegionKind::Parallelepiped) {
    detail::require_in_region(lat, xbar, region);
    PeriodicGaussianDensity density(lat, params.sigma_x);
    return density(xbar);
}

struct MonteCarloEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t samples = 0;
};

// Monte-Carlo mutual information between the reduced source and the
// eavesdropper view, as the sample mean of the exact log density ratio.
// Both densities are computable lattice sums, so the estimator carries no
// discretization bias.
inline MonteCarloEstimate mi_estimate(const LatticeBasis& lat,
                                      const SourceParams& params,
                                      std::uint64_t samples, std::uint64_t seed,
                                      RegionKind region = RegionKind::Parallelepiped) {
    if (samples < 10'000) throw ConfigError("mi_estimate requires samples >= 1e4");
    const int n = lat.dimension();
    PeriodicGaussianDensity cond(lat, params.sigma2());
    PeriodicGaussianDensity marg(lat, params.sigma_x);
    const double coeff = params.coeff_z();
    MeanVar acc;
    Eigen::VectorXd x(n);
    Eigen::VectorXd z(n);
    for (std::uint64_t s = 0; s < samples; ++s) {
        Rng rng(seed, s);
        sample_xz(params, n, rng, x, z);
        const Eigen::VectorXd xbar = lat.mod_region(x, region);
        const double pc = std::max(cond(xbar - coeff * z), 1e-300);
        const double pm = std::max(marg(xbar), 1e-300);
        acc.add(std::log(pc) - std::log(pm));
    }
    return {acc.mean(), acc.stderr_of_mean(), samples};
}

// Binned total-variation distance between the reduced source and the uniform
// distribution, over a regular grid of the parallelepiped in basis
// coordinates, with a multinomial-bootstrap standard error.
inline MonteCarloEstimate uniformity_tv(const LatticeBasis& lat,
                                        const SourceParams& params,
                                        std::uint64_t samples, int bins_per_dim,
                                        std::uint64_t seed,
                                        int bootstrap_reps = 100) {
    const int n = lat.dimension();
    if (n > 2) throw ConfigError("binned TV requires n <= 2");
    if (bins_per_dim < 16) throw ConfigError("binned TV requires >= 16 bins per dimension");
    if (samples < 1000) throw ConfigError("binned TV requires samples >= 1000");

    const std::size_t total_bins = n == 1
                                       ? static_cast<std::size_t>(bins_per_dim)
                                       : static_cast<std::size_t>(bins_per_dim) *
                                             static_cast<std::size_t>(bins_per_dim);
    std::vector<std::uint64_t> counts(total_bins, 0);
    Eigen::VectorXd x(n);
    for (std::uint64_t s = 0; s < samples; ++s) {
        Rng rng(seed, s);
        for (int i = 0; i < n; ++i) x(i) = params.sigma_x * rng.next_gaussian();
        const Eigen::VectorXd u = lat.coords_of(x);
        std::size_t idx = 0;
        std::size_t weight = 1;
        for (int i = 0; i < n; ++i) {
            const double frac = u(i) - std::floor(u(i));
            int b = static_cast<int>(frac * bins_per_dim);
            b = std::min(std::max(b, 0), bins_per_dim - 1);
            idx += static_cast<std::size_t>(b) * weight;
            weight *= static_cast<std::size_t>(bins_per_dim);
        }
        ++counts[idx];
    }
    const double tv = tv_to_uniform(counts);

    std::vector<double> weights(counts.begin(), counts.end());
    const AliasTable alias(weights);
    MeanVar boot;
    std::vector<std::uint64_t> resampled(total_bins, 0);
    for (int rep = 0; rep < bootstrap_reps; ++rep) {
        Rng rng(seed, 0x4000000000000000ull + static_cast<std::uint64_t>(rep));
        std::fill(resampled.begin(), resampled.end(), 0);
        for (std::uint64_t s = 0; s < samples; ++s) ++resampled[alias.sample(rng)];
        boot.add(tv_to_uniform(resampled));
    }
    const double se = std::sqrt(boot.variance());
    return {tv, se, samples};
}

// Aggregated report of the extractor's uniformity / independence guarantees
// next to their Monte-Carlo measurements.
struct ExtractorReport {
    FlatnessResult eps_sigma2;
    FlatnessResult eps_sigma_x;
    double mi_estimate = 0.0;
    double mi_stderr = 0.0;
    double mi_bound_log = 0.0;    // ln(1+eps(sigma2)) - ln(1-eps(sigma_x))
    bool mi_bound_vacuous = false;  // eps(sigma_x) > 1/2: the log bound is void
    double mi_bound_linear = 0.0;   // eps(sigma2) + 2 eps(sigma_x)
    double mi_bound_three = 0.0;    // 3 eps(sigma2)
    double tv = 0.0;
    double tv_stderr = 0.0;
    bool tv_available = false;
    double entropy_rate_lower_bound = 0.0;  // (1/n)(ln V - ln(1+eps(sigma_x)))
    bool sigma_ordering_ok = false;         // sigma_x >= sigma2 always holds
    bool relaxation_ordering_ok = false;    // 3 eps(sigma2) >= eps(sigma2) + 2 eps(sigma_x)
    std::uint64_t samples = 0;
};

inline ExtractorReport build_extractor_report(
    const LatticeBasis& lat, const SourceParams& params, std::uint64_t samples,
    int bins_per_dim, std::uint64_t seed,
    RegionKind region = RegionKind::Parallelepiped, const ThetaOptions& opts = {}) {
    ExtractorReport r;
    r.eps_sigma2 = flatness_factor(lat, params.sigma2(), opts);
    r.eps_sigma_x = flatness_factor(lat, params.sigma_x, opts);
    const auto mi = mi_estimate(lat, params, samples, seed, region);
    r.mi_estimate = mi.estimate;
    r.mi_stderr = mi.stderr_;
    r.samples = samples;
    const double e2 = r.eps_sigma2.epsilon;
    const double ex = r.eps_sigma_x.epsilon;
    r.mi_bound_vacuous = ex > 0.5;
    r.mi_bound_log = r.mi_bound_vacuous
                         ? std::numeric_limits<double>::quiet_NaN()
                         : std::log1p(e2) - std::log1p(-ex);
    r.mi_bound_linear = e2 + 2.0 * ex;
    r.mi_bound_three = 3.0 * e2;
    if (lat.dimension() <= 2) {
        const auto tv = uniformity_tv(lat, params, samples, bins_per_dim, seed);
        r.tv = tv.estimate;
        r.tv_stderr = tv.stderr_;
        r.tv_available = true;
    }
    r.entropy_rate_lower_bound =
        (std::log(lat.volume()) - std::log1p(ex)) / lat.dimension();
    r.sigma_ordering_ok = params.sigma_x >= params.sigma2() - 1e-15;
    r.relaxation_ordering_ok = r.mi_bound_three >= r.mi_bound_linear - 1e-15;
    return r;
}

}  // namespace latkey
