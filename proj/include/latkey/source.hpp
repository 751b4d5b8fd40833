#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

#include "latkey/errors.hpp"
#include "latkey/rng.hpp"

namespace latkey {

enum class SourceMode { Markov, Explicit };

// Zero-mean jointly Gaussian triple (X, Y, Z), i.i.d. across dimensions,
// described by per-dimension standard deviations and pairwise correlations.
// The default joint law is the Markov chain Y - X - Z, which realizes both
// regression decompositions X = rho_xy (sx/sy) Y + W1 and
// X = rho_xz (sx/sz) Z + W2 and forces rho_yz = rho_xy * rho_xz.
struct SourceParams {
    double sigma_x = 1.0;
    double sigma_y = 1.0;
    double sigma_z = 1.0;
    double rho_xy = 0.0;
    double rho_xz = 0.0;
    double rho_yz = 0.0;
    SourceMode mode = SourceMode::Markov;

    static SourceParams markov(double sx, double sy, double sz, double rxy,
                               double rxz) {
        SourceParams p;
        p.sigma_x = sx;
        p.sigma_y = sy;
        p.sigma_z = sz;
        p.rho_xy = rxy;
        p.rho_xz = rxz;
        p.rho_yz = rxy * rxz;
        p.mode = SourceMode::Markov;
        p.validate();
        return p;
    }

    static SourceParams explicit_cov(const Eigen::Matrix3d& cov) {
        SourceParams p;
        for (int i = 0; i < 3; ++i) {
            if (!(cov(i, i) > 0.0)) {
                throw ConfigError("explicit covariance needs positive diagonal");
            }
        }
        p.sigma_x = std::sqrt(cov(0, 0));
        p.sigma_y = std::sqrt(cov(1, 1));
        p.sigma_z = std::sqrt(cov(2, 2));
        p.rho_xy = cov(0, 1) / (p.sigma_x * p.sigma_y);
        p.rho_xz = cov(0, 2) / (p.sigma_x * p.sigma_z);
        p.rho_yz = cov(1, 2) / (p.sigma_y * p.sigma_z);
        p.mode = SourceMode::Explicit;
        p.validate();
        return p;
    }

    // Simplified model X = Z + W with independent W of std-dev sigma_w:
    // equivalent to rho_xz = sigma_z / sigma_x, where the regression
    // coefficient becomes exactly 1 and sigma2 = sigma_w.
    static SourceParams section3_model(double sigma_z, double sigma_w,
                                       double rho_xy = 0.0) {
        const double sx = std::sqrt(sigma_z * sigma_z + sigma_w * sigma_w);
        return markov(sx, sx, sigma_z, rho_xy, sigma_z / sx);
    }

    double sigma1() const { return sigma_x * std::sqrt(1.0 - rho_xy * rho_xy); }
    double sigma2() const { return sigma_x * std::sqrt(1.0 - rho_xz * rho_xz); }

    // Regression coefficients from Y and Z onto X.
    double coeff_y() const { return rho_xy * sigma_x / sigma_y; }
    double coeff_z() const { return rho_xz * sigma_x / sigma_z; }

    // Bob's channel is better than Eve's. (Equivalent to rho_xy^2 > rho_xz^2;
    // stated on the noise variances so it stays meaningful for negative
    // correlations.)
    bool degraded() const { return sigma1() < sigma2(); }

    Eigen::Matrix3d correlation() const {
        Eigen::Matrix3d r;
        r << 1.0, rho_xy, rho_xz,
             rho_xy, 1.0, rho_yz,
             rho_xz, rho_yz, 1.0;
        return r;
    }

    Eigen::Matrix3d covariance() const {
        const Eigen::Vector3d s(sigma_x, sigma_y, sigma_z);
        return s.asDiagonal() * correlation() * s.asDiagonal();
    }

    void validate() const {
        if (!(sigma_x > 0.0) || !(sigma_y > 0.0) || !(sigma_z > 0.0)) {
            throw ConfigError("source standard deviations must be positive");
        }
        auto in_open_unit = [](double r) { return r > -1.0 && r < 1.0; };
        if (!in_open_unit(rho_xy) || !in_open_unit(rho_xz) || !in_open_unit(rho_yz)) {
            throw ConfigError("correlation coefficients must lie in (-1, 1)");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(correlation());
        if (es.eigenvalues().minCoeff() < -1e-12) {
            throw ConfigError("correlation matrix is not positive semidefinite");
        }
    }
};

struct XYZSample {
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
};

// One i.i.d. draw of the n-dimensional triple. Draw order per dimension is
// fixed (three normals) so results depend only on (params, rng state).
inline XYZSample sample_xyz(const SourceParams& p, int n, Rng& rng) {
    if (n < 1) throw ConfigError("sample dimension must be >= 1");
    XYZSample s{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    if (p.mode == SourceMode::Markov) {
        const double cy = p.rho_xy * p.sigma_y / p.sigma_x;
        const double cz = p.rho_xz * p.sigma_z / p.sigma_x;
        const double ry = p.sigma_y * std::sqrt(1.0 - p.rho_xy * p.rho_xy);
        const double rz = p.sigma_z * std::sqrt(1.0 - p.rho_xz * p.rho_xz);
        for (int i = 0; i < n; ++i) {
            const double gx = rng.next_gaussian();
            const double gy = rng.next_gaussian();
            const double gz = rng.next_gaussian();
            s.x(i) = p.sigma_x * gx;
            s.y(i) = cy * s.x(i) + ry * gy;
            s.z(i) = cz * s.x(i) + rz * gz;
        }
        return s;
    }
    // explicit mode: symmetric square root of the covariance, tolerating a
    // semidefinite matrix (eigenvalues clamped at zero)
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(p.covariance());
    if (es.eigenvalues().minCoeff() < -1e-9) {
        throw ConfigError("explicit covariance is not positive semidefinite");
    }
    const Eigen::Matrix3d root =
        es.eigenvectors() *
        es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
        es.eigenvectors().transpose();
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d g(rng.next_gaussian(), rng.next_gaussian(),
                                rng.next_gaussian());
        const Eigen::Vector3d v = root * g;
        s.x(i) = v(0);
        s.y(i) = v(1);
        s.z(i) = v(2);
    }
    return s;
}

// Marginal (X, Z) pair draw consistent with sample_xyz's law.
inline void sample_xz(const SourceParams& p, int n, Rng& rng, Eigen::VectorXd& x,
                      Eigen::VectorXd& z) {
    const double cz = p.rho_xz * p.sigma_z / p.sigma_x;
    const double rz = p.sigma_z * std::sqrt(1.0 - p.rho_xz * p.rho_xz);
    for (int i = 0; i < n; ++i) {
        const double gx = rng.next_gaussian();
        const double gz = rng.next_gaussian();
        x(i) = p.sigma_x * gx;
        z(i) = cz * x(i) + rz * gz;
    }
}

struct DegradednessReport {
    bool degraded = false;
    double mi_xy = 0.0;  // I(X;Y), nats per dimension
    double mi_xz = 0.0;  // I(X;Z), nats per dimension
};

inline DegradednessReport degradedness_report(const SourceParams& p) {
    DegradednessReport r;
    r.degraded = p.degraded();
    r.mi_xy = -0.5 * std::log1p(-p.rho_xy * p.rho_xy);
    r.mi_xz = -0.5 * std::log1p(-p.rho_xz * p.rho_xz);
    return r;
}

}  // namespace latkey
