#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace eegdec {

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic random stream. The engine is std::mt19937_64 (bit-exact across
// platforms); all distributions are hand-rolled so results do not depend on
// the standard library implementation. Substreams are forked by key so that
// parallel consumers draw independent, schedule-independent streams.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    uint64_t seed() const { return seed_; }

    uint64_t bits() { return engine_(); }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller. Two engine draws per call, no caching,
    // so the draw count per call is fixed.
    double normal() {
        double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; // (0, 1]
        double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;      // [0, 1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Uniform integer in [0, n). Rejection sampling, unbiased.
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Fisher-Yates, independent of std::shuffle's unspecified draw pattern.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent substream keyed by a label. Forking uses the parent seed,
    // not the engine state, so fork order never matters.
    Rng fork(std::string_view key) const {
        return Rng(splitmix64(seed_ ^ fnv1a64(key)));
    }

    Rng fork(std::string_view key, uint64_t index) const {
        return Rng(splitmix64(splitmix64(seed_ ^ fnv1a64(key)) + index));
    }

  private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace eegdec
