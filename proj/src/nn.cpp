#include "certismooth/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "certismooth/rng.hpp"

namespace certismooth::nn {

namespace {

void check_dims(const Mlp& params, const Vec& input) {
    if (params.layers.empty()) throw std::invalid_argument("mlp: no layers");
    if (input.size() != params.input_dim()) {
        throw std::invalid_argument("mlp: input length does not match first layer");
    }
    for (std::size_t i = 1; i < params.layers.size(); ++i) {
        if (params.layers[i].w.cols != params.layers[i - 1].w.rows) {
            throw std::invalid_argument("mlp: layer dimensions do not chain");
        }
    }
}

Vec affine(const Layer& layer, const Vec& x) {
    Vec out(layer.w.rows);
    for (std::size_t r = 0; r < layer.w.rows; ++r) {
        double acc = layer.b[r];
        const double* row = &layer.w.a[r * layer.w.cols];
        for (std::size_t c = 0; c < layer.w.cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
    return out;
}

void apply_activation(Activation act, Vec& v) {
    if (act == Activation::Tanh) {
        for (double& x : v) x = std::tanh(x);
    }
}

double eval_ce(const Mlp& params, const Vec& input, int label) {
    return cross_entropy(forward(params, input), label).first;
}

}  // namespace

Mlp make_mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& acts,
             std::uint64_t seed) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1) {
        throw std::invalid_argument("make_mlp: dims/acts mismatch");
    }
    Mlp mlp;
    rng::Stream rs(rng::derive_key(seed, {0x6d6c70ULL}));
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer layer;
        layer.w = Matrix(dims[i + 1], dims[i]);
        layer.b.assign(dims[i + 1], 0.0);
        layer.act = acts[i];
        double bound = std::sqrt(6.0 / static_cast<double>(dims[i] + dims[i + 1]));
        for (double& w : layer.w.a) w = bound * (2.0 * rs.next_unit() - 1.0);
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

MlpGrads zero_grads(const Mlp& params) {
    MlpGrads g;
    g.layers.reserve(params.layers.size());
    for (const Layer& layer : params.layers) {
        LayerGrads lg;
        lg.w = Matrix(layer.w.rows, layer.w.cols);
        lg.b.assign(layer.b.size(), 0.0);
        g.layers.push_back(std::move(lg));
    }
    g.input.assign(params.input_dim(), 0.0);
    return g;
}

void accumulate(MlpGrads& into, const MlpGrads& g, double scale) {
    for (std::size_t i = 0; i < into.layers.size(); ++i) {
        for (std::size_t j = 0; j < into.layers[i].w.a.size(); ++j) {
            into.layers[i].w.a[j] += scale * g.layers[i].w.a[j];
        }
        for (std::size_t j = 0; j < into.layers[i].b.size(); ++j) {
            into.layers[i].b[j] += scale * g.layers[i].b[j];
        }
    }
    for (std::size_t j = 0; j < into.input.size() && j < g.input.size(); ++j) {
        into.input[j] += scale * g.input[j];
    }
}

void scale_grads(MlpGrads& g, double scale) {
    for (auto& lg : g.layers) {
        for (double& v : lg.w.a) v *= scale;
        for (double& v : lg.b) v *= scale;
    }
    for (double& v : g.input) v *= scale;
}

Vec forward(const Mlp& params, const Vec& input) {
    check_dims(params, input);
    Vec cur = input;
    for (const Layer& layer : params.layers) {
        cur = affine(layer, cur);
        apply_activation(layer.act, cur);
    }
    return cur;
}

MlpGrads backward(const Mlp& params, const Vec& input, const Vec& upstream_grad) {
    check_dims(params, input);
    if (upstream_grad.size() != params.output_dim()) {
        throw std::invalid_argument("backward: upstream length does not match output");
    }
    // forward pass keeping post-activation values per layer
    std::vector<Vec> acts;
    acts.reserve(params.layers.size() + 1);
    acts.push_back(input);
    for (const Layer& layer : params.layers) {
        Vec v = affine(layer, acts.back());
        apply_activation(layer.act, v);
        acts.push_back(std::move(v));
    }

    MlpGrads grads = zero_grads(params);
    Vec delta = upstream_grad;  // d loss / d (post-activation of current layer)
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const Layer& layer = params.layers[li];
        const Vec& out = acts[li + 1];
        const Vec& in = acts[li];
        // through activation: tanh'(z) = 1 - tanh(z)^2, and out == tanh(z)
        Vec dz(delta.size());
        for (std::size_t r = 0; r < delta.size(); ++r) {
            dz[r] = layer.act == Activation::Tanh ? delta[r] * (1.0 - out[r] * out[r])
                                                  : delta[r];
        }
        LayerGrads& lg = grads.layers[li];
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            lg.b[r] = dz[r];
            double* wrow = &lg.w.a[r * layer.w.cols];
            for (std::size_t c = 0; c < layer.w.cols; ++c) wrow[c] = dz[r] * in[c];
        }
        Vec prev(layer.w.cols, 0.0);
        for (std::size_t r = 0; r < layer.w.rows; ++r) {
            const double* wrow = &layer.w.a[r * layer.w.cols];
            for (std::size_t c = 0; c < layer.w.cols; ++c) prev[c] += wrow[c] * dz[r];
        }
        delta = std::move(prev);
    }
    grads.input = std::move(delta);
    return grads;
}

std::pair<double, Vec> cross_entropy(const Vec& logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw std::invalid_argument("cross_entropy: label out of range");
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    Vec grad(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        grad[i] = std::exp(logits[i] - mx);
        sum += grad[i];
    }
    double loss = std::log(sum) - (logits[static_cast<std::size_t>(label)] - mx);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        grad[i] = grad[i] / sum - (static_cast<int>(i) == label ? 1.0 : 0.0);
    }
    return {loss, grad};
}

void sgd_step(Mlp& params, const MlpGrads& grads, double lr, double momentum,
              SgdState& state) {
    if (!(lr > 0.0) || momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("sgd_step: need lr > 0 and momentum in [0,1)");
    }
    if (state.velocity.empty()) {
        for (const Layer& layer : params.layers) {
            LayerGrads v;
            v.w = Matrix(layer.w.rows, layer.w.cols);
            v.b.assign(layer.b.size(), 0.0);
            state.velocity.push_back(std::move(v));
        }
    }
    for (const auto& lg : grads.layers) {
        for (double v : lg.w.a) {
            if (!std::isfinite(v)) throw TrainingError("sgd_step: non-finite gradient");
        }
        for (double v : lg.b) {
            if (!std::isfinite(v)) throw TrainingError("sgd_step: non-finite gradient");
        }
    }
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        Layer& layer = params.layers[i];
        LayerGrads& vel = state.velocity[i];
        const LayerGrads& g = grads.layers[i];
        for (std::size_t j = 0; j < layer.w.a.size(); ++j) {
            vel.w.a[j] = momentum * vel.w.a[j] + g.w.a[j];
            layer.w.a[j] -= lr * vel.w.a[j];
        }
        for (std::size_t j = 0; j < layer.b.size(); ++j) {
            vel.b[j] = momentum * vel.b[j] + g.b[j];
            layer.b[j] -= lr * vel.b[j];
        }
    }
}

double grad_check(const Mlp& params, const Vec& input, int label, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be > 0");
    Vec logits = forward(params, input);
    auto [loss, dlogits] = cross_entropy(logits, label);
    (void)loss;
    MlpGrads analytic = backward(params, input, dlogits);

    double worst = 0.0;
    auto compare = [&](double got, double want) {
        double denom = std::max({std::fabs(got), std::fabs(want), 1e-8});
        worst = std::max(worst, std::fabs(got - want) / denom);
    };

    Mlp probe = params;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        for (std::size_t j = 0; j < params.layers[li].w.a.size(); ++j) {
            double saved = probe.layers[li].w.a[j];
            probe.layers[li].w.a[j] = saved + h;
            double up = eval_ce(probe, input, label);
            probe.layers[li].w.a[j] = saved - h;
            double dn = eval_ce(probe, input, label);
            probe.layers[li].w.a[j] = saved;
            compare(analytic.layers[li].w.a[j], (up - dn) / (2.0 * h));
        }
        for (std::size_t j = 0; j < params.layers[li].b.size(); ++j) {
            double saved = probe.layers[li].b[j];
            probe.layers[li].b[j] = saved + h;
            double up = eval_ce(probe, input, label);
            probe.layers[li].b[j] = saved - h;
            double dn = eval_ce(probe, input, label);
            probe.layers[li].b[j] = saved;
            compare(analytic.layers[li].b[j], (up - dn) / (2.0 * h));
        }
    }
    Vec x = input;
    for (std::size_t j = 0; j < x.size(); ++j) {
        double saved = x[j];
        x[j] = saved + h;
        double up = eval_ce(params, x, label);
        x[j] = saved - h;
        double dn = eval_ce(params, x, label);
        x[j] = saved;
        compare(analytic.input[j], (up - dn) / (2.0 * h));
    }
    return worst;
}

namespace {

constexpr char kMagic[4] = {'C', 'S', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_mlp(const Mlp& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_mlp: cannot open " + path);
    out.write(kMagic, 4);
    write_raw(out, kVersion);
    write_raw(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const Layer& layer : params.layers) {
        write_raw(out, static_cast<std::uint32_t>(layer.w.rows));
        write_raw(out, static_cast<std::uint32_t>(layer.w.cols));
        write_raw(out, static_cast<std::uint8_t>(layer.act));
        out.write(reinterpret_cast<const char*>(layer.w.a.data()),
                  static_cast<std::streamsize>(layer.w.a.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.b.data()),
                  static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
    }
    if (!out) throw DataError("save_mlp: write failed for " + path);
}

Mlp load_mlp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_mlp: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("load_mlp: bad magic in " + path);
    }
    auto version = read_raw<std::uint32_t>(in);
    if (version != kVersion) throw DataError("load_mlp: unsupported version");
    auto n_layers = read_raw<std::uint32_t>(in);
    Mlp mlp;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        auto rows = read_raw<std::uint32_t>(in);
        auto cols = read_raw<std::uint32_t>(in);
        auto act = read_raw<std::uint8_t>(in);
        Layer layer;
        layer.w = Matrix(rows, cols);
        layer.b.assign(rows, 0.0);
        layer.act = static_cast<Activation>(act);
        in.read(reinterpret_cast<char*>(layer.w.a.data()),
                static_cast<std::streamsize>(layer.w.a.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(layer.b.data()),
                static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
        if (!in) throw DataError("load_mlp: truncated file " + path);
        mlp.layers.push_back(std::move(layer));
    }
    return mlp;
}

}  // namespace certismooth::nn
