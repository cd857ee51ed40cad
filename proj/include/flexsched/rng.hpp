#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "flexsched/errors.hpp"

namespace flexsched {

// Stateless 64-bit mixer used to derive independent seed streams from a root
// seed. Worker k of a run seeded with s always draws from stream(s, k), so
// results do not depend on how work is sharded across threads.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t root, uint64_t stream) {
    return splitmix64(splitmix64(root) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

// Deterministic RNG wrapper. Integer and index sampling are implemented
// directly on the raw 64-bit stream instead of std distributions, whose
// output is implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    static Rng stream(uint64_t root, uint64_t stream_index) {
        return Rng(derive_seed(root, stream_index));
    }

    uint64_t next_u64() { return gen_(); }

    // Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (lo > hi) throw ConfigError("uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform_real() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Index drawn proportionally to the (non-negative) weights. Weights need
    // not be normalized; an all-zero vector is rejected.
    size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw TrainingError("categorical: non-positive weight total");
        double u = uniform_real() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;  // u landed on the rounding tail
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace flexsched
