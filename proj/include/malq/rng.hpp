#pragma once

#include <cstdint>

namespace malq {

// Counter-style splitmix64 stream (Steele/Lea/Flood constants). Pinned here
// because run manifests promise byte-identical replays: std:: engines and
// distributions are implementation-defined across standard libraries.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 random mantissa bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform01_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    // Uniform integer in [0, n), n > 0. Multiply-high mapping; the bias of
    // n / 2^64 is far below anything the statistical tests can resolve.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    void reseed(std::uint64_t seed) { state_ = seed; }

private:
    std::uint64_t state_;
};

// Decorrelated seed for an auxiliary stream (salted, then mixed once), so
// one user-facing seed can drive several independent generators.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    SplitMix64 mix(seed ^ (0xA0761D6478BD642FULL * (salt + 1)));
    return mix.next();
}

}  // namespace malq
