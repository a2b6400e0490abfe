#pragma once

#include <array>
#include <cstdint>

namespace capo {

// splitmix64 (Steele, Lea, Flood); used only to expand seeds.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

// splitmix64 finalizer on its own; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ (Blackman & Vigna). State words come from splitmix64 applied
/// to the seed, matching the reference seeding recipe, so outputs are
/// reproducible across implementations.
class Xoshiro256pp {
  public:
    explicit Xoshiro256pp(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    /// Derived substream: sub_seed = mix64(seed ^ mix64(stream_id + 2^64/phi)).
    /// Distinct stream ids give distinct sub-seeds for a fixed run seed.
    static Xoshiro256pp stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Xoshiro256pp(mix64(seed ^ mix64(stream_id + 0x9E3779B97F4A7C15ULL)));
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n); rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_;
};

/// Index drawn from a probability vector by inverse CDF. Zero-probability
/// entries are never selected.
template <typename Vec>
int sample_index(const Vec& probs, Xoshiro256pp& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    int last_positive = -1;
    for (int i = 0; i < n; ++i) {
        const double p = probs[i];
        if (p <= 0.0) continue;
        last_positive = i;
        acc += p;
        if (u < acc) return i;
    }
    return last_positive;  // u fell into the rounding slack at the top
}

}  // namespace capo
