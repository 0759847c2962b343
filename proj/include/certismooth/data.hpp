#pragma once

#include <cstdint>
#include <string>

#include "certismooth/types.hpp"

namespace certismooth::data {

// Synthetic class-conditional world: K isotropic Gaussians with means in
// [0.2, 0.8]^d, shared within-class std gamma, uniform priors. The Bayes
// classifier and posterior-mean denoiser of this world are known in closed
// form, which is what makes desk-scale verification possible.
struct GmmWorld {
    int K = 0;
    int d = 0;
    std::vector<Vec> means;
    double gamma = 0.0;
    Vec priors;
};

struct Sample {
    Vec x;  // [0,1]^d
    int label = 0;
};

enum class Split { Train, Eval, Reference };

struct Dataset {
    std::vector<Sample> samples;
    Split split = Split::Eval;
};

// Means drawn from seeded uniform [0.2, 0.8]^d with min pairwise distance
// >= 4*gamma enforced by rejection (up to 1000 re-draws total).
GmmWorld make_gmm_world(int K, int d, double gamma, std::uint64_t seed);

// x = clamp(mu_c + gamma * z, 0, 1), z ~ N(0, I), per-sample substream.
Dataset sample_dataset(const GmmWorld& world, int n_per_class, std::uint64_t seed,
                       Split split = Split::Eval);

// [0,1] <-> [-1,1]: y = 2x - 1 (mean 0.5, std 0.5 per channel).
Vec normalize(const Vec& x);
Vec denormalize(const Vec& y);
void clamp01(Vec& x);

// CSV rows: integer label, then d features in [0,1]. Malformed rows raise
// DataError with the offending line number.
Dataset load_csv_dataset(const std::string& path);

// Plain-text key-value serialization of a world, for reproducibility.
void save_world(const GmmWorld& world, const std::string& path);
GmmWorld load_world(const std::string& path);

double min_pairwise_mean_distance(const GmmWorld& world);

}  // namespace certismooth::data
