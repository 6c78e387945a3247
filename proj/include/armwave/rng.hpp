#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace armwave {

/// splitmix64 finalizer. Used to spread structured inputs (stage tags,
/// sweep indices) into decorrelated 64-bit seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Derive a stream seed from a base seed, a stage tag and up to two indices.
/// The derivation is part of the public contract: running stages one at a
/// time from files with these seeds reproduces an in-process run exactly.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t i = 0, std::uint64_t j = 0) {
    std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a over the tag
    for (unsigned char c : tag)
        h = (h ^ c) * 0x100000001b3ull;
    h = mix64(h ^ mix64(base));
    h = mix64(h ^ mix64(i + 0x9e3779b97f4a7c15ull));
    h = mix64(h ^ mix64(j + 0x6a09e667f3bcc909ull));
    return h;
}

/// Seeded generator with explicit Gaussian sampling.
///
/// Normals come from our own Box-Muller transform instead of
/// std::normal_distribution, whose output sequence is implementation
/// defined; this keeps seeded runs bit-identical across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite.
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Circularly symmetric complex normal with total variance `var`
    /// (var/2 per quadrature).
    std::complex<double> complex_normal(double var) {
        double s = std::sqrt(var * 0.5);
        double re = normal();
        double im = normal();
        return {s * re, s * im};
    }

    std::uint64_t next_u64() { return eng_(); }

  private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace armwave
