#include "certismooth/rng.hpp"

#include <cmath>

namespace certismooth::rng {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

std::uint64_t avalanche(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = avalanche(seed + kGolden);
    for (std::uint64_t p : path) {
        key = avalanche(key ^ (p + kGolden));
    }
    return key;
}

std::uint64_t Stream::next_u64() {
    state_ += kGolden;
    return avalanche(state_);
}

double Stream::next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Stream::next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

int Stream::next_int(int lo, int hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1ULL;
    return lo + static_cast<int>(next_u64() % span);
}

void Stream::fill_gaussian(Vec& out) {
    for (double& v : out) v = next_gaussian();
}

Vec Stream::gaussian_vec(std::size_t d) {
    Vec out(d);
    fill_gaussian(out);
    return out;
}

}  // namespace certismooth::rng
