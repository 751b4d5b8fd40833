#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "latkey/rng.hpp"

namespace latkey {

// Kahan-compensated accumulator. Aggregates must not depend on summation
// order beyond floating-point at the 1-ulp level, and Monte-Carlo loops sum
// millions of terms.
class KahanSum {
public:
    void add(double v) {
        const double y = v - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Streaming mean / standard error with compensated sums.
class MeanVar {
public:
    void add(double v) {
        sum_.add(v);
        sumsq_.add(v * v);
        ++count_;
    }
    std::uint64_t count() const { return count_; }
    double mean() const { return count_ ? sum_.value() / static_cast<double>(count_) : 0.0; }
    double variance() const {
        if (count_ < 2) return 0.0;
        const double n = static_cast<double>(count_);
        const double m = mean();
        return std::max(0.0, (sumsq_.value() - n * m * m) / (n - 1.0));
    }
    double stderr_of_mean() const {
        return count_ ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
    }

private:
    KahanSum sum_;
    KahanSum sumsq_;
    std::uint64_t count_ = 0;
};

inline double binomial_stderr(double p_hat, std::uint64_t n) {
    if (n == 0) return 0.0;
    return std::sqrt(std::max(0.0, p_hat * (1.0 - p_hat)) / static_cast<double>(n));
}

// Plug-in entropy in nats with Miller-Madow bias correction, capped at the
// log alphabet size (the correction alone can push a near-uniform histogram
// over it).
inline double entropy_miller_madow(const std::vector<std::uint64_t>& counts) {
    std::uint64_t total = 0;
    std::uint64_t support = 0;
    for (auto c : counts) {
        total += c;
        if (c > 0) ++support;
    }
    if (total == 0) return 0.0;
    KahanSum h;
    const double n = static_cast<double>(total);
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h.add(-p * std::log(p));
    }
    double est = h.value();
    if (support > 1) est += static_cast<double>(support - 1) / (2.0 * n);
    return std::min(est, std::log(static_cast<double>(counts.size())));
}

// Walker alias table for O(1) categorical sampling; used by the multinomial
// bootstrap over histogram bins.
class AliasTable {
public:
    explicit AliasTable(const std::vector<double>& weights) {
        const std::size_t n = weights.size();
        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        double total = 0.0;
        for (double w : weights) total += w;
        std::vector<double> scaled(n);
        std::vector<std::uint32_t> small, large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = total > 0.0 ? weights[i] * static_cast<double>(n) / total : 1.0;
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        }
        while (!small.empty() && !large.empty()) {
            const auto s = small.back(); small.pop_back();
            const auto l = large.back(); large.pop_back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            (scaled[l] < 1.0 ? small : large).push_back(l);
        }
        for (auto l : large) prob_[l] = 1.0;
        for (auto s : small) prob_[s] = 1.0;
    }

    std::size_t sample(Rng& rng) const {
        const std::size_t i = static_cast<std::size_t>(rng.next_below(prob_.size()));
        return rng.next_unit() < prob_[i] ? i : alias_[i];
    }

private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

// Total variation distance between a count histogram and the uniform
// histogram over the same bins.
inline double tv_to_uniform(const std::vector<std::uint64_t>& counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0 || counts.empty()) return 0.0;
    const double uniform = 1.0 / static_cast<double>(counts.size());
    KahanSum acc;
    for (auto c : counts) {
        acc.add(std::abs(static_cast<double>(c) / static_cast<double>(total) - uniform));
    }
    return 0.5 * acc.value();
}

}  // namespace latkey
