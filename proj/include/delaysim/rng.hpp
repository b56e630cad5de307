#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace delaysim {

/// Well-known stream purpose tags. Streams with distinct tags never overlap,
/// so e.g. the Brownian increments and the jump times of one path are
/// independent. Experiment code may also form ad-hoc tags (base + offset).
namespace streams {
inline constexpr std::uint32_t brownian = 1;
inline constexpr std::uint32_t jumps = 2;
inline constexpr std::uint32_t validation = 3;
inline constexpr std::uint32_t smoothing = 4;
inline constexpr std::uint32_t moments = 5;
}  // namespace streams

/// Identifies one logical random stream: every draw is a pure function of
/// (seed, stream tag, path index, position within the stream).
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint32_t stream = 0;
    std::uint32_t path = 0;
};

/// Philox 4x32 block function, 10 rounds. Maps a 128-bit counter and 64-bit
/// key to four statistically independent 32-bit words.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t mult0 = 0xD2511F53u;
    constexpr std::uint32_t mult1 = 0xCD9E8D57u;
    constexpr std::uint32_t bump0 = 0x9E3779B9u;
    constexpr std::uint32_t bump1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += bump0;
            key[1] += bump1;
        }
        const std::uint64_t prod0 = static_cast<std::uint64_t>(mult0) * counter[0];
        const std::uint64_t prod1 = static_cast<std::uint64_t>(mult1) * counter[2];
        counter = {static_cast<std::uint32_t>(prod1 >> 32) ^ counter[1] ^ key[0],
                   static_cast<std::uint32_t>(prod1),
                   static_cast<std::uint32_t>(prod0 >> 32) ^ counter[3] ^ key[1],
                   static_cast<std::uint32_t>(prod0)};
    }
    return counter;
}

/// Counter-based random stream. Stateless across paths: any path of any
/// experiment can be (re)generated independently on any thread, which is what
/// makes parallel Monte Carlo runs byte-reproducible.
class RandomStream {
public:
    explicit RandomStream(const StreamKey& key)
        : key_{static_cast<std::uint32_t>(key.seed),
               static_cast<std::uint32_t>(key.seed >> 32)},
          path_(key.path),
          stream_(key.stream) {}

    RandomStream(std::uint64_t seed, std::uint32_t stream, std::uint32_t path)
        : RandomStream(StreamKey{seed, stream, path}) {}

    std::uint64_t next_u64() {
        if (remaining_ == 0) refill();
        const int idx = 2 * (2 - remaining_);
        --remaining_;
        return static_cast<std::uint64_t>(block_words_[idx]) |
               (static_cast<std::uint64_t>(block_words_[idx + 1]) << 32);
    }

    /// Uniform draw strictly inside (0,1): 53 random bits centered in the
    /// unit interval, so log/inverse transforms never see 0 or 1.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double next_normal() {
        if (has_cached_normal_) {
            has_cached_normal_ = false;
            return cached_normal_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_normal_ = radius * std::sin(angle);
        has_cached_normal_ = true;
        return radius * std::cos(angle);
    }

    /// Poisson draw by products of uniforms, chunked so large means stay in
    /// floating-point range (exp(-30) per chunk).
    long next_poisson(double mean) {
        if (!(std::isfinite(mean) && mean >= 0.0))
            throw std::invalid_argument("RandomStream::next_poisson: mean must be >= 0");
        long total = 0;
        while (mean > 0.0) {
            const double chunk = std::min(mean, 30.0);
            const double limit = std::exp(-chunk);
            double product = next_uniform();
            long count = 0;
            while (product > limit) {
                product *= next_uniform();
                ++count;
            }
            total += count;
            mean -= chunk;
        }
        return total;
    }

private:
    void refill() {
        block_words_ = philox4x32({static_cast<std::uint32_t>(block_),
                                   static_cast<std::uint32_t>(block_ >> 32), path_, stream_},
                                  key_);
        ++block_;
        remaining_ = 2;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_;
    std::uint32_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> block_words_{};
    int remaining_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace delaysim
