#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "latkey/errors.hpp"

namespace latkey {

// Depth-first sphere enumeration over a lattice given by basis columns,
// in the Schnorr-Euchner zig-zag order on a QR factorization. Serves three
// consumers: exact closest-point queries, shortest-vector queries, and
// ball enumeration for Gaussian lattice sums.
class SphereEnumerator {
public:
    explicit SphereEnumerator(const Eigen::MatrixXd& basis)
        : n_(static_cast<int>(basis.cols())), r_(n_, n_), q_t_(n_, n_) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
        Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
        Eigen::MatrixXd q = qr.householderQ();
        // normalize to a positive diagonal so level costs are well defined
        for (int i = 0; i < n_; ++i) {
            if (r(i, i) < 0) {
                r.row(i) = -r.row(i);
                q.col(i) = -q.col(i);
            }
        }
        r_ = r;
        q_t_ = q.transpose();
    }

    int dimension() const { return n_; }

    // Integer coordinates of the lattice point closest to x. Ties are broken
    // by the first point visited, which starts from the rounded (half-to-even)
    // Babai descent, so equidistant cases resolve to the rounded coordinates.
    std::vector<long long> closest(const Eigen::VectorXd& x) const {
        std::vector<long long> best(static_cast<std::size_t>(n_), 0);
        double best_dist = std::numeric_limits<double>::infinity();
        enumerate_(x, std::numeric_limits<double>::infinity(), true, false, 0,
                   [&](const long long* u, double dist2) {
                       if (dist2 < best_dist) {
                           best_dist = dist2;
                           best.assign(u, u + n_);
                       }
                   });
        return best;
    }

    // Euclidean norm of a shortest nonzero lattice vector (exact search).
    double shortest_nonzero_norm() const {
        // any basis column bounds the minimum from above
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n_; ++i) best = std::min(best, r_.col(i).norm());
        double best_dist = best * best * (1.0 + 1e-12);
        enumerate_(Eigen::VectorXd::Zero(n_), best_dist, true, true, 0,
                   [&](const long long*, double dist2) {
                       if (dist2 > 0 && dist2 < best_dist) best_dist = dist2;
                   });
        return std::sqrt(best_dist);
    }

    // Visits every lattice point with ||Bu - center|| <= radius. Returns the
    // number of points visited; throws NumericalGuardError past the budget.
    template <class Fn>
    std::uint64_t for_each_in_ball(const Eigen::VectorXd& center, double radius,
                                   std::uint64_t budget, Fn&& fn) const {
        return enumerate_(center, radius * radius, false, false, budget,
                          std::forward<Fn>(fn));
    }

private:
    // Core DFS. `shrink` makes it a nearest/shortest search (radius tightens as
    // leaves improve), `skip_zero` rejects the origin (shortest-vector mode).
    // Budget 0 disables the guard.
    template <class Fn>
    std::uint64_t enumerate_(const Eigen::VectorXd& center, double radius2,
                             bool shrink, bool skip_zero, std::uint64_t budget,
                             Fn&& fn) const {
        const Eigen::VectorXd y = q_t_ * center;
        std::vector<long long> u(static_cast<std::size_t>(n_), 0);
        std::vector<long long> step(static_cast<std::size_t>(n_), 0);
        std::vector<double> c(static_cast<std::size_t>(n_), 0.0);
        std::vector<double> partial(static_cast<std::size_t>(n_) + 1, 0.0);
        std::uint64_t leaves = 0;
        std::uint64_t nodes = 0;
        const std::uint64_t node_cap =
            budget ? budget * 64 : std::numeric_limits<std::uint64_t>::max();

        int k = n_ - 1;
        init_level_(k, y, u, step, c);
        for (;;) {
            if (++nodes > node_cap) {
                throw NumericalGuardError("enumeration node budget exceeded");
            }
            const double diff = r_(k, k) * (static_cast<double>(u[static_cast<std::size_t>(k)]) - c[static_cast<std::size_t>(k)]);
            const double dist2 = partial[static_cast<std::size_t>(k) + 1] + diff * diff;
            if (dist2 <= radius2) {
                if (k == 0) {
                    bool zero = false;
                    if (skip_zero) {
                        zero = true;
                        for (int i = 0; i < n_; ++i) {
                            if (u[static_cast<std::size_t>(i)] != 0) { zero = false; break; }
                        }
                    }
                    if (!zero) {
                        ++leaves;
                        if (budget && leaves > budget) {
                            throw NumericalGuardError(
                                "enumeration point budget exceeded");
                        }
                        fn(u.data(), dist2);
                        if (shrink && dist2 < radius2) radius2 = dist2;
                    }
                    advance_(0, u, step);
                } else {
                    partial[static_cast<std::size_t>(k)] = dist2;
                    --k;
                    init_level_(k, y, u, step, c);
                }
            } else {
                // zig-zag order is monotone in |u - c|: the rest of the level fails
                ++k;
                if (k == n_) break;
                advance_(k, u, step);
            }
        }
        return leaves;
    }

    void init_level_(int k, const Eigen::VectorXd& y,
                     std::vector<long long>& u, std::vector<long long>& step,
                     std::vector<double>& c) const {
        double acc = y(k);
        for (int j = k + 1; j < n_; ++j) {
            acc -= r_(k, j) * static_cast<double>(u[static_cast<std::size_t>(j)]);
        }
        const double ck = acc / r_(k, k);
        c[static_cast<std::size_t>(k)] = ck;
        const double rounded = std::nearbyint(ck);
        u[static_cast<std::size_t>(k)] = static_cast<long long>(rounded);
        step[static_cast<std::size_t>(k)] = (ck - rounded >= 0.0) ? 1 : -1;
    }

    static void advance_(int k, std::vector<long long>& u, std::vector<long long>& step) {
        const long long dx = step[static_cast<std::size_t>(k)];
        u[static_cast<std::size_t>(k)] += dx;
        step[static_cast<std::size_t>(k)] = -dx - (dx > 0 ? 1 : -1);
    }

    int n_;
    Eigen::MatrixXd r_;    // upper triangular, positive diagonal
    Eigen::MatrixXd q_t_;  // Q^T for projecting targets
};

}  // namespace latkey
