// Deterministic noise stream. All randomness in a run flows from one
// 64-bit seed through splitmix64; the Gaussian transform is done by
// hand so identical seeds give bit-identical streams on any platform.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

#include "etrap/constants.hpp"

namespace etrap {

class NoiseStream {
  public:
    explicit NoiseStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes two uniforms per pair.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        while (u1 <= 0.0) u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(kTwoPi * u2);
        have_spare_ = true;
        return r * std::cos(kTwoPi * u2);
    }

    /// Circularly symmetric complex Gaussian with E[|z|^2] = variance.
    std::complex<double> next_complex(double variance) {
        if (variance <= 0.0) return {0.0, 0.0};
        const double s = std::sqrt(0.5 * variance);
        const double re = next_normal();
        const double im = next_normal();
        return {s * re, s * im};
    }

    /// Unit complex phase factor.
    std::complex<double> next_phase() {
        const double theta = kTwoPi * next_uniform();
        return {std::cos(theta), std::sin(theta)};
    }

    /// Derive an independent child stream (used to decouple noise
    /// consumers so adding one does not shift another's sequence).
    NoiseStream fork(std::uint64_t tag) {
        NoiseStream child(next_u64() ^ (0xA5A5A5A55A5A5A5AULL * (tag + 1)));
        return child;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace etrap
