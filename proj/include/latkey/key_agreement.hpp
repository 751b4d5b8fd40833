#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <thread>
#include <utility>
#include <vector>

#include "latkey/errors.hpp"
#include "latkey/lattice.hpp"
#include "latkey/rng.hpp"
#include "latkey/source.hpp"
#include "latkey/stats.hpp"

namespace latkey {

// Alice's side of the one-way protocol over the chain Lambda1 > Lambda2 >
// Lambda3: quantize to Lambda1, announce the Lambda1/Lambda2 coset (Voronoi
// leader), keep the Lambda2/Lambda3 coset as the key.
struct EncodeResult {
    std::vector<long long> xq_coords;  // X_Q in Lambda1 basis coordinates
    Eigen::VectorXd x_q;
    Eigen::VectorXd e_q;       // quantization error, lies in V(Lambda1)
    Eigen::VectorXd s_leader;  // Voronoi coset leader of S in V(Lambda2)
    Eigen::VectorXd k_leader;  // key leader in R(Lambda3)
    std::uint64_t s_index = 0;
    std::uint64_t k_index = 0;
};

namespace detail {

inline std::vector<long long> mod_digits(const std::vector<long long>& v, int m) {
    std::vector<long long> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = ((v[i] % m) + m) % m;
    return out;
}

inline std::uint64_t digits_to_index(const std::vector<long long>& digits, int m) {
    std::uint64_t index = 0;
    std::uint64_t weight = 1;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        index += static_cast<std::uint64_t>(digits[i]) * weight;
        weight *= static_cast<std::uint64_t>(m);
    }
    return index;
}

inline bool all_zero(const std::vector<long long>& v) {
    for (auto c : v) {
        if (c != 0) return false;
    }
    return true;
}

}  // namespace detail

// The chain quantizations are evaluated on exact integer coordinates and
// canonicalized per coset: with even scale factors a large fraction of
// Lambda1 points sit exactly on Lambda2 cell boundaries, and resolving those
// ties through floating-point scale products would make S and K depend on
// the representative rather than on x mod Lambda3.
inline EncodeResult alice_encode(const Eigen::VectorXd& x, const NestedChain& chain) {
    const auto& l1 = chain.lambda1();
    const auto& l2 = chain.lambda2();
    const int s2 = chain.scale2();
    const int s3 = chain.scale3();

    EncodeResult r;
    r.xq_coords = l1.nearest_coords(x);
    r.x_q = l1.point_at(r.xq_coords);
    r.e_q = x - r.x_q;

    // S = X_Q mod V(Lambda2): the Voronoi leader of the coset of X_Q
    const auto s_digits = detail::mod_digits(r.xq_coords, s2);
    const auto s_coords = l1.voronoi_leader_coords(s_digits, s2);
    r.s_leader = l1.point_at(s_coords);
    r.s_index = detail::digits_to_index(s_digits, s2);

    // K = Q_{Lambda2}(X_Q) mod R(Lambda3); Q_{Lambda2}(X_Q) = X_Q - S exactly
    std::vector<long long> w2(r.xq_coords.size());
    for (std::size_t i = 0; i < w2.size(); ++i) {
        w2[i] = (r.xq_coords[i] - s_coords[i]) / s2;
    }
    const auto k_digits = detail::mod_digits(w2, s3);
    r.k_index = detail::digits_to_index(k_digits, s3);
    const auto k_coords = chain.key_region() == RegionKind::Parallelepiped
                              ? k_digits
                              : l2.voronoi_leader_coords(k_digits, s3);
    r.k_leader = l2.point_at(k_coords);
    return r;
}

struct DecodeResult {
    std::vector<long long> x_hat_coords;  // \hat{X}_Q in Lambda1 coordinates
    Eigen::VectorXd x_hat_q;
    std::uint64_t k_hat_index = 0;
};

// Bob reconstructs the quantized value from the public coset index and his
// scaled observation, then reads off the key coset.
inline DecodeResult bob_decode(const Eigen::VectorXd& y, std::uint64_t s_index,
                               const NestedChain& chain, const SourceParams& params) {
    const auto& l1 = chain.lambda1();
    const auto& l2 = chain.lambda2();
    const int s2 = chain.scale2();
    const int s3 = chain.scale3();
    const int n = chain.dimension();
    if (s_index >= chain.public_cardinality()) {
        throw ConfigError("public message index out of range");
    }

    // deterministic Voronoi leader of the announced coset: the same exact
    // integer function Alice used, so the reconstruction matches hers
    const auto s_digits = coset_digits(s_index, n, s2);
    const auto s_coords = l1.voronoi_leader_coords(s_digits, s2);
    const Eigen::VectorXd s_leader = l1.point_at(s_coords);

    const Eigen::VectorXd target = params.coeff_y() * y - s_leader;
    const auto wy = l2.nearest_coords(target);

    DecodeResult r;
    r.x_hat_coords.resize(s_coords.size());
    for (std::size_t i = 0; i < s_coords.size(); ++i) {
        r.x_hat_coords[i] = s_coords[i] + static_cast<long long>(s2) * wy[i];
    }
    r.x_hat_q = l1.point_at(r.x_hat_coords);

    // Khat = Q_{Lambda2}(XhatQ) mod R(Lambda3), through the same coset
    // canonicalization (XhatQ - S is on Lambda2 by construction)
    const auto w_hat = wy;
    r.k_hat_index = detail::digits_to_index(detail::mod_digits(w_hat, s3), s3);
    return r;
}

struct TrialRecord {
    std::uint64_t trial = 0;
    std::uint64_t s_index = 0;
    std::uint64_t k_index = 0;
    std::uint64_t k_hat_index = 0;
    bool match = false;
    bool xq_match = false;
    bool predicate = false;
};

struct TrialMetrics {
    std::uint64_t trials = 0;
    double error_rate = 0.0;  // P{K != Khat}
    double error_rate_se = 0.0;
    double xq_error_rate = 0.0;  // P{XhatQ != XQ}, reported separately
    double xq_error_rate_se = 0.0;
    std::vector<std::uint64_t> key_histogram;
    double key_entropy = 0.0;                // nats (Miller-Madow, capped)
    double key_uniformity_deviation = 0.0;   // max_k |p_k - 1/|K||
    double key_uniformity_max_se = 0.0;      // max_k binomial stderr
    double d_av = 0.0;
    double d_av_se = 0.0;
    std::uint64_t d_av_cells = 0;  // occupied (S, binned Z) cells
    bool d_av_sparse = false;      // cells within 20x of trials: estimate inflates
    double secrecy_bound = 0.0;    // d_av * ln(|K| / d_av)
    double reliability_predicate_agreement = 0.0;
    std::uint64_t predicate_soundness_violations = 0;
    double eq_decomposition_max_dev = 0.0;  // worst residual off Lambda3
    int z_bins = 0;
};

struct RunOptions {
    int threads = 1;
    int z_bins = 8;  // equiprobable Gaussian-quantile bins per Z coordinate
    int bootstrap_reps = 50;
    bool collect_records = false;
};

namespace detail {

inline int gaussian_quantile_bin(double value, double sigma, int bins) {
    const double cdf = 0.5 * std::erfc(-value / (sigma * std::numbers::sqrt2));
    int b = static_cast<int>(cdf * bins);
    return std::min(std::max(b, 0), bins - 1);
}

struct BlockPartial {
    std::vector<std::uint64_t> key_hist;
    std::uint64_t k_err = 0;
    std::uint64_t xq_err = 0;
    std::uint64_t predicate_true = 0;
    std::uint64_t agree = 0;
    std::uint64_t soundness_violations = 0;
    double eq7_max_dev = 0.0;
    // joint (S, binned Z) x key counts, kept sparse
    std::map<std::pair<std::uint64_t, std::uint32_t>, std::uint32_t> joint;
    std::vector<TrialRecord> records;
};

}  // namespace detail

// Runs i.i.d. trials of sample -> encode -> decode and aggregates the
// uniformity / reliability / secrecy measurements. Trials are partitioned
// into fixed blocks; every trial draws from its own (seed, trial) substream
// and blocks are merged in index order, so the result is identical for any
// worker count.
inline TrialMetrics run_trials(const NestedChain& chain, const SourceParams& params,
                               std::uint64_t trials, std::uint64_t seed,
                               const RunOptions& opts = {},
                               std::vector<TrialRecord>* records_out = nullptr) {
    if (trials < 1000) throw ConfigError("run_trials requires trials >= 1000");
    const std::uint64_t key_card = chain.key_cardinality();
    if (key_card * 20 > trials) {
        throw ConfigError("histogram resolution guard: need trials >= 20 * key cardinality");
    }
    const int n = chain.dimension();
    const int zb = opts.z_bins;
    if (zb < 2 || zb > 64) throw ConfigError("z_bins must be in [2, 64]");
    double cells = static_cast<double>(chain.public_cardinality());
    for (int i = 0; i < n; ++i) cells *= zb;
    if (cells > 9e18) throw ConfigError("joint (S, Z) cell space overflows");

    const std::uint64_t block_size = 4096;
    const std::uint64_t num_blocks = (trials + block_size - 1) / block_size;
    std::vector<detail::BlockPartial> partials(num_blocks);

    const double coeff_y = params.coeff_y();
    const auto& l2 = chain.lambda2();
    const auto& l3 = chain.lambda3();

    auto run_block = [&](std::uint64_t b) {
        auto& part = partials[b];
        part.key_hist.assign(key_card, 0);
        const std::uint64_t lo = b * block_size;
        const std::uint64_t hi = std::min(trials, lo + block_size);
        for (std::uint64_t t = lo; t < hi; ++t) {
            Rng rng(seed, t);
            const XYZSample s = sample_xyz(params, n, rng);
            const EncodeResult enc = alice_encode(s.x, chain);
            const DecodeResult dec = bob_decode(s.y, enc.s_index, chain, params);

            const bool k_match = enc.k_index == dec.k_hat_index;
            const bool xq_match = enc.xq_coords == dec.x_hat_coords;
            const Eigen::VectorXd w1 = s.x - coeff_y * s.y;
            const bool predicate = detail::all_zero(l2.nearest_coords(enc.e_q - w1));

            ++part.key_hist[enc.k_index];
            if (!k_match) ++part.k_err;
            if (!xq_match) ++part.xq_err;
            if (predicate) ++part.predicate_true;
            if (predicate == xq_match) ++part.agree;
            if (predicate && !k_match) ++part.soundness_violations;

            // residual of x = E_Q + S + K + lambda3 must sit on Lambda3
            const Eigen::VectorXd residual =
                l3.coords_of(s.x - enc.e_q - enc.s_leader - enc.k_leader);
            for (int i = 0; i < n; ++i) {
                const double dev = std::abs(residual(i) - std::nearbyint(residual(i)));
                part.eq7_max_dev = std::max(part.eq7_max_dev, dev);
            }

            std::uint64_t cell = enc.s_index;
            for (int i = 0; i < n; ++i) {
                cell = cell * static_cast<std::uint64_t>(zb) +
                       static_cast<std::uint64_t>(
                           detail::gaussian_quantile_bin(s.z(i), params.sigma_z, zb));
            }
            ++part.joint[{cell, static_cast<std::uint32_t>(enc.k_index)}];

            if (opts.collect_records) {
                part.records.push_back({t, enc.s_index, enc.k_index, dec.k_hat_index,
                                        k_match, xq_match, predicate});
            }
        }
    };

    const int workers = std::max(1, std::min<int>(opts.threads,
                                                  static_cast<int>(num_blocks)));
    if (workers == 1) {
        for (std::uint64_t b = 0; b < num_blocks; ++b) run_block(b);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::uint64_t b = next.fetch_add(1);
                    if (b >= num_blocks) return;
                    run_block(b);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    // ordered merge: identical result for every worker count
    TrialMetrics m;
    m.trials = trials;
    m.z_bins = zb;
    m.key_histogram.assign(key_card, 0);
    std::uint64_t k_err = 0, xq_err = 0, agree = 0, soundness = 0;
    std::map<std::pair<std::uint64_t, std::uint32_t>, std::uint64_t> joint;
    for (std::uint64_t b = 0; b < num_blocks; ++b) {
        const auto& part = partials[b];
        for (std::uint64_t k = 0; k < key_card; ++k) m.key_histogram[k] += part.key_hist[k];
        k_err += part.k_err;
        xq_err += part.xq_err;
        agree += part.agree;
        soundness += part.soundness_violations;
        m.eq_decomposition_max_dev = std::max(m.eq_decomposition_max_dev, part.eq7_max_dev);
        for (const auto& [key, count] : part.joint) joint[key] += count;
        if (records_out && opts.collect_records) {
            records_out->insert(records_out->end(), part.records.begin(),
                                part.records.end());
        }
    }

    const double nt = static_cast<double>(trials);
    m.error_rate = static_cast<double>(k_err) / nt;
    m.error_rate_se = binomial_stderr(m.error_rate, trials);
    m.xq_error_rate = static_cast<double>(xq_err) / nt;
    m.xq_error_rate_se = binomial_stderr(m.xq_error_rate, trials);
    m.reliability_predicate_agreement = static_cast<double>(agree) / nt;
    m.predicate_soundness_violations = soundness;

    m.key_entropy = entropy_miller_madow(m.key_histogram);
    const double uniform = 1.0 / static_cast<double>(key_card);
    for (std::uint64_t k = 0; k < key_card; ++k) {
        const double p = static_cast<double>(m.key_histogram[k]) / nt;
        m.key_uniformity_deviation = std::max(m.key_uniformity_deviation,
                                              std::abs(p - uniform));
        m.key_uniformity_max_se = std::max(m.key_uniformity_max_se,
                                           binomial_stderr(p, trials));
    }

    // d_av over the discretized joint alphabet: compact the sparse counts
    struct Entry { std::uint32_t cell; std::uint32_t k; std::uint64_t count; };
    std::vector<Entry> entries;
    entries.reserve(joint.size());
    std::map<std::uint64_t, std::uint32_t> cell_ids;
    for (const auto& [key, count] : joint) {
        const auto [it, inserted] = cell_ids.try_emplace(
            key.first, static_cast<std::uint32_t>(cell_ids.size()));
        entries.push_back({it->second, key.second, count});
    }
    const std::size_t num_cells = cell_ids.size();

    auto d_av_from = [&](const std::vector<std::uint64_t>& entry_counts) {
        std::vector<double> cell_tot(num_cells, 0.0);
        std::vector<double> k_tot(key_card, 0.0);
        double total = 0.0;
        for (std::size_t e = 0; e < entries.size(); ++e) {
            const double c = static_cast<double>(entry_counts[e]);
            cell_tot[entries[e].cell] += c;
            k_tot[entries[e].k] += c;
            total += c;
        }
        if (total == 0.0) return 0.0;
        // TV(p_{SZ|K=k}, p_{SZ}) accumulated per key value; cells the key
        // never hit contribute their full marginal mass
        std::vector<KahanSum> dev(key_card);
        for (const auto& e : entries) {
            if (k_tot[e.k] == 0.0) continue;
            const double cond = static_cast<double>(e.count) / k_tot[e.k];
            const double marg = cell_tot[e.cell] / total;
            dev[static_cast<std::size_t>(e.k)].add(std::abs(cond - marg) - marg);
        }
        KahanSum d_av;
        for (std::uint64_t k = 0; k < key_card; ++k) {
            if (k_tot[k] == 0.0) continue;
            const double tv_k = 0.5 * (1.0 + dev[k].value());
            d_av.add((k_tot[k] / total) * tv_k);
        }
        return d_av.value();
    };

    std::vector<std::uint64_t> base_counts(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) base_counts[e] = entries[e].count;
    m.d_av = d_av_from(base_counts);
    m.d_av_cells = num_cells;
    m.d_av_sparse = num_cells * 20 > trials;

    if (!entries.empty() && opts.bootstrap_reps > 0) {
        std::vector<double> weights(entries.size());
        for (std::size_t e = 0; e < entries.size(); ++e) {
            weights[e] = static_cast<double>(entries[e].count);
        }
        const AliasTable alias(weights);
        MeanVar boot;
        std::vector<std::uint64_t> resampled(entries.size(), 0);
        for (int rep = 0; rep < opts.bootstrap_reps; ++rep) {
            Rng rng(seed, 0x6000000000000000ull + static_cast<std::uint64_t>(rep));
            std::fill(resampled.begin(), resampled.end(), 0);
            for (std::uint64_t s = 0; s < trials; ++s) ++resampled[alias.sample(rng)];
            boot.add(d_av_from(resampled));
        }
        m.d_av_se = std::sqrt(boot.variance());
    }

    m.secrecy_bound = m.d_av > 0.0
                          ? m.d_av * std::log(static_cast<double>(key_card) / m.d_av)
                          : 0.0;
    return m;
}

}  // namespace latkey
