#pragma once

#include <array>
#include <cstdint>

namespace veil {

/// Deterministic 64-bit PRNG: xoshiro256++ seeded through splitmix64.
///
/// The standard-library engines are not used because the distributions
/// (and some engine details) are implementation-defined; identical seeds
/// must produce identical draw sequences on every platform, since mask
/// generation, the test suite and the serialized reports all depend on it.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next() {
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

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform in (-1, 1).
    double signed_unit() { return uniform(-1.0, 1.0); }

    /// Uniform in (0, 1), strictly positive.
    double positive_unit() {
        double v = uniform();
        while (v == 0.0) v = uniform();
        return v;
    }

    /// Uniform index in [0, n). Lemire multiply-shift; bias is < 2^-64.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    /// Independent child stream (for parallel trials with stable results).
    SeededRng fork() { return SeededRng(next() ^ 0x9e3779b97f4a7c15ULL); }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace veil
