#pragma once

#include <cstdint>

namespace fedsim {

// Seeded, portable pseudo-random generator. The state is four 64-bit words
// produced from the seed by splitmix64 (x += 0x9e3779b97f4a7c15; x = (x ^
// x>>30) * 0xbf58476d1ce4e5b9; x = (x ^ x>>27) * 0x94d049bb133111eb; x ^=
// x>>31) and advanced by xoshiro256++. Uniform doubles take the top 53 bits,
// so the uniform stream is bit-identical on every platform; normal() uses
// Box-Muller and therefore matches only platforms with the same libm.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0, 1).
    double next_unit();
    double uniform(double lo, double hi);

    // Standard normal. Draws two uniforms per call (no cached spare).
    double normal();
    double normal(double mean, double stddev);

    // Independent substream: seed and stream are mixed through splitmix64
    // before constructing, so derive(s, 1) and derive(s, 2) do not overlap.
    static Rng derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::uint64_t state_[4];
};

}  // namespace fedsim
