#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace qmf {

// Counter-based RNG (Philox4x32-10). Every draw is a pure function of
// (key, counter), so noise is reproducible independently of execution
// order and can be generated lazily from (seed, channel, step).
namespace philox {

struct Words {
    uint32_t w0, w1, w2, w3;
};

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
    uint64_t p = static_cast<uint64_t>(a) * b;
    hi = static_cast<uint32_t>(p >> 32);
    lo = static_cast<uint32_t>(p);
}

inline Words philox4x32_10(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += W0;
            key[1] += W1;
        }
        uint32_t hi0, lo0, hi1, lo1;
        mulhilo(M0, ctr[0], hi0, lo0);
        mulhilo(M1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return {ctr[0], ctr[1], ctr[2], ctr[3]};
}

// (seed; stream, index) -> two independent 64-bit words.
inline void counter_u64x2(uint64_t seed, uint64_t stream, uint64_t index,
                          uint64_t& a, uint64_t& b) {
    const std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(index), static_cast<uint32_t>(index >> 32),
        static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)};
    const std::array<uint32_t, 2> key = {static_cast<uint32_t>(seed),
                                         static_cast<uint32_t>(seed >> 32)};
    const Words w = philox4x32_10(ctr, key);
    a = (static_cast<uint64_t>(w.w1) << 32) | w.w0;
    b = (static_cast<uint64_t>(w.w3) << 32) | w.w2;
}

inline double u64_to_open_closed(uint64_t x) {
    // (0, 1]: never 0, so log() below is safe.
    return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

inline double u64_to_closed_open(uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// One standard normal per counter (Box-Muller, cosine branch).
inline double normal(uint64_t seed, uint64_t stream, uint64_t index) {
    uint64_t a, b;
    counter_u64x2(seed, stream, index, a, b);
    const double u1 = u64_to_open_closed(a);
    const double u2 = u64_to_closed_open(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace philox

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Child seed for the index-th trajectory/particle of a run. Stable and
// collision-resistant so that renumbering one ensemble does not shift
// another's noise.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 0x243F6A8885A308D3ull));
}

// Gaussian increments dW ~ N(0, dt) for `n_channels` Wiener processes,
// generated on demand from (seed, channel, step) alone.
struct NoisePlan {
    uint64_t seed = 0;
    int n_channels = 1;

    // N(0,1) draw backing channel `channel` at step `step`.
    double unit_normal(int64_t step, int channel) const {
        return philox::normal(seed, static_cast<uint64_t>(channel),
                              static_cast<uint64_t>(step));
    }

    double increment(int64_t step, int channel, double dt) const {
        return unit_normal(step, channel) * std::sqrt(dt);
    }
};

// Sequential stream of draws for sampling tasks (random states, sweeps).
// Streams live in a separate counter plane from NoisePlan channels, so a
// shared seed never aliases noise against sampling.
class Rng {
public:
    Rng(uint64_t seed, uint64_t stream)
        : seed_(seed), stream_(stream | 0x8000000000000000ull) {}

    uint64_t next_u64() {
        uint64_t a, b;
        philox::counter_u64x2(seed_, stream_, index_++, a, b);
        return a;
    }

    double uniform() { return philox::u64_to_closed_open(next_u64()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        uint64_t a, b;
        philox::counter_u64x2(seed_, stream_, index_++, a, b);
        const double u1 = philox::u64_to_open_closed(a);
        const double u2 = philox::u64_to_closed_open(b);
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    uint64_t seed_;
    uint64_t stream_;
    uint64_t index_ = 0;
};

} // namespace qmf
