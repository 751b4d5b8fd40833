#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace latkey {

// Philox-4x32-10 counter-based generator. Chosen because experiments need
// per-trial substreams derived from (master seed, trial index) that are
// independent of execution order and thread count: stream selection is just
// counter initialisation, there is no sequential jump-ahead.
class Philox4x32 {
public:
    Philox4x32(std::uint64_t key_lo, std::uint64_t key_hi) {
        key_[0] = static_cast<std::uint32_t>(key_lo);
        key_[1] = static_cast<std::uint32_t>(key_lo >> 32);
        // the second key word pair rides in the counter prefix so that all
        // 128 bits of (seed, stream) identity participate
        ctr_hi_[0] = static_cast<std::uint32_t>(key_hi);
        ctr_hi_[1] = static_cast<std::uint32_t>(key_hi >> 32);
    }

    // 128-bit output block for counter value `block`
    std::array<std::uint32_t, 4> operator()(std::uint64_t block) const {
        std::array<std::uint32_t, 4> x{
            static_cast<std::uint32_t>(block),
            static_cast<std::uint32_t>(block >> 32),
            ctr_hi_[0],
            ctr_hi_[1],
        };
        std::uint32_t k0 = key_[0];
        std::uint32_t k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = kMul0 * static_cast<std::uint64_t>(x[0]);
            const std::uint64_t p1 = kMul1 * static_cast<std::uint64_t>(x[2]);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return x;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 2> ctr_hi_{};
};

// One deterministic random substream, addressed by (seed, stream). Trials,
// Monte-Carlo samples and bootstrap replicates each get their own stream id.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream)
        : philox_(seed, stream) {}

    std::uint64_t next_u64() {
        if (buffered_ == 0) {
            const auto block = philox_(block_index_++);
            buffer_[0] = static_cast<std::uint64_t>(block[1]) << 32 | block[0];
            buffer_[1] = static_cast<std::uint64_t>(block[3]) << 32 | block[2];
            buffered_ = 2;
        }
        return buffer_[--buffered_];
    }

    // uniform on [0, 1) with 53 random bits
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform on (0, 1]; never returns 0 so it is safe under log()
    double next_unit_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // standard normal via Box-Muller, one spare cached per pair
    double next_gaussian() {
        if (have_spare_gaussian_) {
            have_spare_gaussian_ = false;
            return spare_gaussian_;
        }
        const double u1 = next_unit_open();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_gaussian_ = r * std::sin(theta);
        have_spare_gaussian_ = true;
        return r * std::cos(theta);
    }

    // uniform integer in [0, bound)
    std::uint64_t next_below(std::uint64_t bound) {
        // rejection on the wraparound slice keeps the draw unbiased
        const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
        for (;;) {
            const std::uint64_t v = next_u64();
            if (v < limit) return v % bound;
        }
    }

    // UniformRandomBitGenerator interface
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~std::uint64_t{0}; }
    result_type operator()() { return next_u64(); }

private:
    Philox4x32 philox_;
    std::uint64_t block_index_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double spare_gaussian_ = 0.0;
    bool have_spare_gaussian_ = false;
};

}  // namespace latkey
