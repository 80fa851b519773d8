#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace qgm {

double normal_quantile(double p);

/// SplitMix64 finalizer; the mixing primitive behind all stream derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Purpose tags entering stream keys. Values are part of the reproducibility
/// contract: changing them changes every downstream draw.
enum class StreamPurpose : std::uint64_t {
    PivotalPenalty = 1,
    BootstrapPenalty = 2,
    BootstrapCv = 3,
    SimReplication = 4,
    Generic = 5,
};

/// Deterministic counter-keyed random stream (xoshiro256++ seeded by a
/// SplitMix64 hash of the key words). Identical (master_seed, key) gives an
/// identical draw sequence regardless of thread scheduling.
class Rng {
public:
    Rng(std::uint64_t master_seed, std::initializer_list<std::uint64_t> key) {
        std::uint64_t h = mix64(master_seed);
        for (std::uint64_t w : key) h = mix64(h ^ w);
        for (auto& s : state_) {
            h = mix64(h);
            s = h;
        }
        // xoshiro must not start at the all-zero state
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on (0,1): 53-bit mantissa, shifted off 0 so the inverse CDF
    /// below never sees an endpoint.
    double uniform() {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-54;
    }

    /// Standard normal via inverse CDF; platform-independent given the
    /// uniform stream.
    double normal() { return normal_quantile(uniform()); }

private:
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace qgm
