#pragma once

// Deterministic random streams for the simulator.
//
// Everything that samples (counts, drift, probe noise) draws from a
// RandomStream so that a campaign is a pure function of (scenario, seed).
// The generator and the samplers are implemented here rather than taken
// from <random> because the standard distributions are implementation
// defined and would break byte-identical outputs across toolchains.

#include <cmath>
#include <cstdint>
#include <array>

namespace entsim {

namespace detail {

// splitmix64, used only to expand seeds into generator state.
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace detail

// xoshiro256** with deterministic child-stream splitting.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = detail::splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; uses two uniforms per call so the
    // consumption pattern is independent of call history.
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double gaussian(double mean, double stddev) {
        return mean + stddev * gaussian();
    }

    // Poisson sample. Knuth's product method below 10, Hormann's PTRS
    // transformed rejection above (exact for all means, no normal cutoff).
    std::uint64_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        if (mean < 10.0) return poisson_knuth(mean);
        return poisson_ptrs(mean);
    }

    // Uniform direction on the unit sphere (Marsaglia).
    std::array<double, 3> unit_sphere() {
        for (;;) {
            const double a = 2.0 * uniform() - 1.0;
            const double b = 2.0 * uniform() - 1.0;
            const double q = a * a + b * b;
            if (q >= 1.0 || q == 0.0) continue;
            const double s = 2.0 * std::sqrt(1.0 - q);
            return {a * s, b * s, 1.0 - 2.0 * q};
        }
    }

    // Deterministic substream: children with distinct keys are independent
    // of each other and of the parent's future output.
    RandomStream child(std::uint64_t key) const {
        std::uint64_t mix = state_[0] ^ detail::rotl(state_[3], 13) ^ (key * 0x9e3779b97f4a7c15ull);
        return RandomStream(detail::splitmix64(mix) ^ key);
    }

private:
    std::uint64_t poisson_knuth(double mean) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    std::uint64_t poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::fabs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                -mean + kf * loglam - std::lgamma(kf + 1.0)) {
                return static_cast<std::uint64_t>(kf);
            }
        }
    }

    std::array<std::uint64_t, 4> state_{};
};

} // namespace entsim
