#pragma once

// Seeded RNG. All helpers are hand-rolled on top of mt19937_64 so that a given
// seed produces the same stream on every platform; std::uniform_real_distribution
// and friends do not guarantee that.

#include <cstdint>
#include <random>

#include "rfmesh/math.hpp"

namespace rfmesh {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // Derives an independent stream; used to give each pipeline stage its own seed.
    Rng fork(uint64_t stream) { return Rng(splitmix64(gen_() ^ splitmix64(stream))); }

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits.
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n must be positive.
    int64_t uniform_int(int64_t n) {
        uint64_t un = uint64_t(n);
        uint64_t limit = ~uint64_t(0) - (~uint64_t(0) % un);
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return int64_t(v % un);
    }

    // Standard normal via Box-Muller (deterministic across platforms).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    Vec3 uniform_in_box(const AABB& b) {
        return {uniform(b.lo.x, b.hi.x), uniform(b.lo.y, b.hi.y), uniform(b.lo.z, b.hi.z)};
    }

    Vec3 uniform_unit_vector() {
        // Marsaglia rejection on the cylinder map.
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 2.0 * kPi);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace rfmesh
