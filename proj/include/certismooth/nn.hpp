#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "certismooth/types.hpp"

namespace certismooth::nn {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec a;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

enum class Activation : std::uint8_t { Tanh = 0, Identity = 1 };

struct Layer {
    Matrix w;  // [out x in]
    Vec b;     // [out]
    Activation act = Activation::Tanh;
};

// ModelParams: a chain of affine layers with per-layer activation.
struct Mlp {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
};

struct LayerGrads {
    Matrix w;
    Vec b;
};

// GradientBundle: parameter gradients plus the gradient w.r.t. the input.
struct MlpGrads {
    std::vector<LayerGrads> layers;
    Vec input;
};

// Xavier-uniform init (bound sqrt(6/(fan_in+fan_out))), zero bias, seeded.
// dims = {in, h1, ..., out}; acts has dims.size()-1 entries.
Mlp make_mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& acts,
             std::uint64_t seed);

MlpGrads zero_grads(const Mlp& params);
void accumulate(MlpGrads& into, const MlpGrads& g, double scale);
void scale_grads(MlpGrads& g, double scale);

Vec forward(const Mlp& params, const Vec& input);

// Exact reverse-mode gradients of forward w.r.t. every parameter and the
// input, given d(loss)/d(output).
MlpGrads backward(const Mlp& params, const Vec& input, const Vec& upstream_grad);

// Softmax cross-entropy with max-subtraction; returns (loss, dloss/dlogits).
std::pair<double, Vec> cross_entropy(const Vec& logits, int label);

struct SgdState {
    std::vector<LayerGrads> velocity;
};

// v <- momentum * v + g; p <- p - lr * v. Throws TrainingError on non-finite
// gradients.
void sgd_step(Mlp& params, const MlpGrads& grads, double lr, double momentum, SgdState& state);

// Central-difference verification of CE(forward(params, input), label)
// against the analytic parameter + input gradients; returns the worst
// relative error with denominator max(|a|, |b|, 1e-8).
double grad_check(const Mlp& params, const Vec& input, int label, double h);

// Flat binary checkpoint: magic "CSNN", version, layer count, then per layer
// rows, cols, activation, row-major f64 weights, f64 bias (little-endian).
void save_mlp(const Mlp& params, const std::string& path);
Mlp load_mlp(const std::string& path);

}  // namespace certismooth::nn
