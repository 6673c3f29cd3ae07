#pragma once

// Seeded random helpers.  mt19937_64 output is fully specified by the
// standard; the distribution mappings below are written out by hand so the
// generated streams are bit-identical across compilers and platforms.

#include <random>

#include "invariantlab/common.hpp"

namespace invariantlab {

class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0)
        : gen_(seed * 0x9e3779b97f4a7c15ULL + stream) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1): 53 high bits scaled, the standard fixed-point map.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform on the complex unit circle.
    cplx unit_phase() {
        double a = uniform(0.0, 2.0 * std::acos(-1.0));
        return {std::cos(a), std::sin(a)};
    }

    // Uniform on the closed disc of given radius (area measure).
    cplx in_disc(double radius) {
        double r = radius * std::sqrt(uniform01());
        return r * unit_phase();
    }

    // Point of C^k with each coordinate uniform in the disc of given radius.
    CVec in_polydisc(int k, double radius) {
        CVec v(k);
        for (int i = 0; i < k; ++i) v[i] = in_disc(radius);
        return v;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace invariantlab
