#pragma once

#include <cstdint>
#include <cmath>

#include "qgs/vec.hpp"

namespace qgs {

// Deterministic PRNG with hand-rolled distributions so that streams are
// reproducible bit-for-bit independent of the standard library version.
// splitmix64 state transition; substreams derived by hashing (seed, tag, index).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ull) {
        // warm up so nearby seeds decorrelate
        next_u64();
        next_u64();
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller (one value per call, no caching)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    Vec3 unit_vector() {
        // uniform on the sphere
        const double z = uniform(-1.0, 1.0);
        const double phi = uniform(0.0, 6.283185307179586476925286766559);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

    Quat unit_quat() {
        Quat q{normal(), normal(), normal(), normal()};
        const double n = quat_norm(q);
        return {q.w / n, q.x / n, q.y / n, q.z / n};
    }

private:
    uint64_t state_;
};

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    a ^= b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2);
    return a;
}

// Stateless substream derivation: the stream for (seed, tag, step) does not depend
// on how many draws other streams consumed. Training resume relies on this.
inline Rng substream(uint64_t seed, uint64_t tag, uint64_t step) {
    return Rng(hash_combine(hash_combine(seed, tag), step));
}

}  // namespace qgs
