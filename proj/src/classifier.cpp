#include "certismooth/classifier.hpp"

#include <cmath>

#include "certismooth/rng.hpp"

namespace certismooth::classifier {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Vec softmax(const Vec& logits) {
    Vec p = logits;
    double mx = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}
}  // namespace

int argmax_class(const Vec& scores) {
    if (scores.empty()) throw std::invalid_argument("argmax_class: empty scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return static_cast<int>(best);
}

LinearClassifier::LinearClassifier(nn::Matrix w, Vec b) : w_(std::move(w)), b_(std::move(b)) {
    if (w_.rows != b_.size()) {
        throw std::invalid_argument("LinearClassifier: weight/bias dimension mismatch");
    }
}

Vec LinearClassifier::logits(const Vec& x) const {
    if (x.size() != w_.cols) {
        throw std::invalid_argument("LinearClassifier: input dimension mismatch");
    }
    Vec out(w_.rows);
    for (std::size_t r = 0; r < w_.rows; ++r) {
        double acc = b_[r];
        for (std::size_t c = 0; c < w_.cols; ++c) acc += w_.at(r, c) * x[c];
        out[r] = acc;
    }
    return out;
}

Vec LinearClassifier::input_gradient(const Vec& x, int label) const {
    Vec p = softmax(logits(x));
    p[static_cast<std::size_t>(label)] -= 1.0;
    // W^T (softmax - onehot)
    Vec g(w_.cols, 0.0);
    for (std::size_t r = 0; r < w_.rows; ++r) {
        for (std::size_t c = 0; c < w_.cols; ++c) g[c] += w_.at(r, c) * p[r];
    }
    return g;
}

BayesClassifier::BayesClassifier(data::GmmWorld world) : world_(std::move(world)) {}

Vec BayesClassifier::logits(const Vec& x) const {
    if (static_cast<int>(x.size()) != world_.d) {
        throw std::invalid_argument("BayesClassifier: input dimension mismatch");
    }
    const double var = world_.gamma * world_.gamma;
    const double norm = -0.5 * world_.d * (kLog2Pi + 2.0 * std::log(world_.gamma));
    Vec out(static_cast<std::size_t>(world_.K));
    for (int c = 0; c < world_.K; ++c) {
        const Vec& mu = world_.means[static_cast<std::size_t>(c)];
        double sq = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            double diff = x[j] - mu[j];
            sq += diff * diff;
        }
        out[static_cast<std::size_t>(c)] =
            std::log(world_.priors[static_cast<std::size_t>(c)]) + norm - 0.5 * sq / var;
    }
    return out;
}

Vec BayesClassifier::input_gradient(const Vec& x, int label) const {
    Vec p = softmax(logits(x));
    p[static_cast<std::size_t>(label)] -= 1.0;
    const double var = world_.gamma * world_.gamma;
    // d logit_c / dx = -(x - mu_c)/var; chain with (softmax - onehot)
    Vec g(x.size(), 0.0);
    for (int c = 0; c < world_.K; ++c) {
        const Vec& mu = world_.means[static_cast<std::size_t>(c)];
        double coef = p[static_cast<std::size_t>(c)] / var;
        for (std::size_t j = 0; j < x.size(); ++j) g[j] -= coef * (x[j] - mu[j]);
    }
    return g;
}

NeuralClassifier::NeuralClassifier(nn::Mlp mlp) : mlp_(std::move(mlp)) {}

Vec NeuralClassifier::logits(const Vec& x) const { return nn::forward(mlp_, x); }

Vec NeuralClassifier::input_gradient(const Vec& x, int label) const {
    auto [loss, dlogits] = nn::cross_entropy(logits(x), label);
    (void)loss;
    return nn::backward(mlp_, x, dlogits).input;
}

std::pair<double, nn::MlpGrads> NeuralClassifier::param_gradient(const Vec& x,
                                                                 int label) const {
    auto [loss, dlogits] = nn::cross_entropy(logits(x), label);
    return {loss, nn::backward(mlp_, x, dlogits)};
}

NeuralClassifier train_softmax_classifier(const data::Dataset& train, int num_classes,
                                          int hidden, int steps, double lr,
                                          double momentum, int batch,
                                          std::uint64_t seed) {
    if (train.samples.empty()) throw std::invalid_argument("train_softmax_classifier: empty data");
    const std::size_t d = train.samples.front().x.size();
    nn::Mlp mlp = nn::make_mlp({d, static_cast<std::size_t>(hidden),
                                static_cast<std::size_t>(num_classes)},
                               {nn::Activation::Tanh, nn::Activation::Identity}, seed);
    nn::SgdState state;
    rng::Stream pick = rng::substream(seed, {0x636c66ULL});
    const int n = static_cast<int>(train.samples.size());
    for (int step = 0; step < steps; ++step) {
        nn::MlpGrads acc = nn::zero_grads(mlp);
        for (int b = 0; b < batch; ++b) {
            const data::Sample& s = train.samples[static_cast<std::size_t>(pick.next_int(0, n - 1))];
            auto [loss, dlogits] = nn::cross_entropy(nn::forward(mlp, s.x), s.label);
            (void)loss;
            nn::accumulate(acc, nn::backward(mlp, s.x, dlogits), 1.0 / batch);
        }
        nn::sgd_step(mlp, acc, lr, momentum, state);
    }
    return NeuralClassifier(std::move(mlp));
}

}  // namespace certismooth::classifier
