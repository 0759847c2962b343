#pragma once

#include <cstdint>
#include <initializer_list>

#include "certismooth/types.hpp"

namespace certismooth::rng {

// splitmix64 finalizer; the mixing primitive behind all substream keys.
std::uint64_t avalanche(std::uint64_t x);

// Derives a stream key from a base seed and a path of counters, e.g.
// (run seed, example index, phase, draw index). Draws from distinct paths
// are independent no matter which worker, batch, or order produced them.
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

// Sequential generator over one substream.
class Stream {
public:
    explicit Stream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64();
    // Uniform on (0, 1]; never returns 0 so log() is safe.
    double next_unit();
    // Standard normal via Box-Muller; two uniforms per call, no cached spare,
    // so the draw sequence is independent of call pattern.
    double next_gaussian();
    // Uniform integer in [lo, hi] inclusive.
    int next_int(int lo, int hi);

    void fill_gaussian(Vec& out);
    Vec gaussian_vec(std::size_t d);

private:
    std::uint64_t state_;
};

inline Stream substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Stream(derive_key(seed, path));
}

}  // namespace certismooth::rng
