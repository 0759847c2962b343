#pragma once

#include <cstdint>
#include <memory>

#include "certismooth/data.hpp"
#include "certismooth/nn.hpp"
#include "certismooth/types.hpp"

namespace certismooth::classifier {

// Lowest index wins ties, everywhere a class is picked from scores.
int argmax_class(const Vec& scores);

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual int num_classes() const = 0;
    virtual Vec logits(const Vec& x) const = 0;
    // Exact gradient of CE(logits(x), label) w.r.t. x.
    virtual Vec input_gradient(const Vec& x, int label) const = 0;

    int predict(const Vec& x) const { return argmax_class(logits(x)); }
};

class LinearClassifier final : public Classifier {
public:
    LinearClassifier(nn::Matrix w, Vec b);

    int num_classes() const override { return static_cast<int>(w_.rows); }
    Vec logits(const Vec& x) const override;
    Vec input_gradient(const Vec& x, int label) const override;

    const nn::Matrix& weights() const { return w_; }
    const Vec& bias() const { return b_; }

private:
    nn::Matrix w_;
    Vec b_;
};

// Exact Bayes classifier of a GmmWorld: log prior + isotropic Gaussian
// log-likelihood. Works in unclamped space (boundary truncation ignored,
// same approximation as the data module).
class BayesClassifier final : public Classifier {
public:
    explicit BayesClassifier(data::GmmWorld world);

    int num_classes() const override { return world_.K; }
    Vec logits(const Vec& x) const override;
    Vec input_gradient(const Vec& x, int label) const override;

    const data::GmmWorld& world() const { return world_; }

private:
    data::GmmWorld world_;
};

class NeuralClassifier final : public Classifier {
public:
    explicit NeuralClassifier(nn::Mlp mlp);

    int num_classes() const override { return static_cast<int>(mlp_.output_dim()); }
    Vec logits(const Vec& x) const override;
    Vec input_gradient(const Vec& x, int label) const override;

    // (CE loss, parameter gradients) at one labelled input.
    std::pair<double, nn::MlpGrads> param_gradient(const Vec& x, int label) const;

    nn::Mlp& params() { return mlp_; }
    const nn::Mlp& params() const { return mlp_; }

private:
    nn::Mlp mlp_;
};

// Minibatch SGD softmax fit on clean data; the stand-in for an off-the-shelf
// classifier trained on the task distribution.
NeuralClassifier train_softmax_classifier(const data::Dataset& train, int num_classes,
                                          int hidden, int steps, double lr,
                                          double momentum, int batch,
                                          std::uint64_t seed);

}  // namespace certismooth::classifier
