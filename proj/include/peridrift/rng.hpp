#pragma once

// Counter-based random number generation (Philox4x32-10) and a seeded
// normal-variate stream. Replicates get independent streams from the same
// 64-bit seed, and any (seed, stream, draw index) triple reproduces the
// same variate regardless of execution order.

#include <array>
#include <cmath>
#include <cstdint>

namespace peridrift {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

namespace detail {

inline void philox_round(PhiloxBlock& ctr, const PhiloxKey& key) {
    constexpr std::uint32_t mul0 = 0xD2511F53u;
    constexpr std::uint32_t mul1 = 0xCD9E8D57u;
    const std::uint64_t p0 = static_cast<std::uint64_t>(mul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(mul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline void philox_bump(PhiloxKey& key) {
    key[0] += 0x9E3779B9u;  // golden ratio
    key[1] += 0xBB67AE85u;  // sqrt(3) - 1
}

}  // namespace detail

// One 10-round Philox4x32 block. Matches the published reference vectors.
inline PhiloxBlock philox4x32(PhiloxBlock ctr, PhiloxKey key) {
    detail::philox_round(ctr, key);
    for (int r = 1; r < 10; ++r) {
        detail::philox_bump(key);
        detail::philox_round(ctr, key);
    }
    return ctr;
}

// Uniform double in (0, 1] from 53 random bits (never 0, so log() is safe).
inline double uniform_from_bits(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// Stream of N(0,1) variates keyed by (seed, stream). Each Philox block
// yields one Box-Muller pair; the second variate is cached.
class NormalStream {
  public:
    NormalStream(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const PhiloxBlock out = philox4x32(
            {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
             stream_lo_, stream_hi_},
            key_);
        ++block_;
        const double u1 = uniform_from_bits(out[0], out[1]);
        const double u2 = uniform_from_bits(out[2], out[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Uniform double in (0,1]; consumes one block, independent of next().
    double next_uniform() {
        const PhiloxBlock out = philox4x32(
            {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
             stream_lo_, stream_hi_},
            key_);
        ++block_;
        return uniform_from_bits(out[0], out[1]);
    }

  private:
    PhiloxKey key_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Composes a substream id so that nested experiment loops (e.g. n-index x
// replicate) never collide: 32 bits each.
inline std::uint64_t substream(std::uint64_t group, std::uint64_t member) {
    return (group << 32) ^ member;
}

}  // namespace peridrift
