#include "certismooth/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "certismooth/rng.hpp"

namespace certismooth::denoiser {

Vec forward_diffuse(const Vec& x, int t, const Vec& noise,
                    const schedule::NoiseSchedule& sched) {
    if (x.size() != noise.size()) {
        throw std::invalid_argument("forward_diffuse: x/noise length mismatch");
    }
    if (t < 0 || t > sched.T) throw std::domain_error("forward_diffuse: t outside [0, T]");
    double abar = sched.alpha_bar[static_cast<std::size_t>(t)];
    double sa = std::sqrt(abar);
    double sn = std::sqrt(1.0 - abar);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sa * x[i] + sn * noise[i];
    return out;
}

Vec denoise_one_step(const Denoiser& den, const Vec& x_hat, double sigma,
                     const schedule::NoiseSchedule& sched,
                     const schedule::CorrectionFactor& k, const Conditioning& cond) {
    if (!(sigma > 0.0)) throw std::domain_error("denoise_one_step: sigma must be > 0");
    auto match = schedule::sigma_to_timestep(sched, sigma);
    int t_prime = schedule::corrected_timestep(match.t_hat, k, sched.T);
    double scale = std::sqrt(schedule::sigma_to_alpha(sigma));
    Vec x_t(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) x_t[i] = scale * x_hat[i];
    Vec eps_hat = den.eps(x_t, match.t_hat, cond, x_t, t_prime, sigma);
    Vec out(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) out[i] = x_hat[i] - sigma * eps_hat[i];
    return out;
}

Vec denoise_one_step_vjp(const Denoiser& den, const Vec& x_hat, double sigma,
                         const schedule::NoiseSchedule& sched,
                         const schedule::CorrectionFactor& k, const Conditioning& cond,
                         const Vec& upstream) {
    if (!(sigma > 0.0)) throw std::domain_error("denoise_one_step_vjp: sigma must be > 0");
    auto match = schedule::sigma_to_timestep(sched, sigma);
    int t_prime = schedule::corrected_timestep(match.t_hat, k, sched.T);
    double scale = std::sqrt(schedule::sigma_to_alpha(sigma));
    Vec x_t(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) x_t[i] = scale * x_hat[i];
    Vec g_xt, g_xbar;
    den.eps_vjp(x_t, match.t_hat, cond, x_t, t_prime, sigma, upstream, g_xt, g_xbar);
    Vec out(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        out[i] = upstream[i] - sigma * scale * (g_xt[i] + g_xbar[i]);
    }
    return out;
}

Vec gaussian_posterior_mean(const Vec& mu, double gamma, double sigma, const Vec& x_hat) {
    if (!(gamma > 0.0) || !(sigma > 0.0)) {
        throw std::domain_error("gaussian_posterior_mean: gamma and sigma must be > 0");
    }
    double g2 = gamma * gamma;
    double s2 = sigma * sigma;
    Vec out(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        out[i] = (g2 * x_hat[i] + s2 * mu[i]) / (g2 + s2);
    }
    return out;
}

Vec IdentityDenoiser::eps(const Vec& x_t, int, const Conditioning&, const Vec&, int,
                          double) const {
    return Vec(x_t.size(), 0.0);
}

void IdentityDenoiser::eps_vjp(const Vec& x_t, int, const Conditioning&, const Vec&, int,
                              double, const Vec&, Vec& grad_x_t, Vec& grad_x_bar) const {
    grad_x_t.assign(x_t.size(), 0.0);
    grad_x_bar.assign(x_t.size(), 0.0);
}

AnalyticGmmDenoiser::AnalyticGmmDenoiser(const data::GmmWorld& world)
    : gamma_(2.0 * world.gamma), d_(world.d) {
    means_.reserve(world.means.size());
    for (const Vec& mu : world.means) means_.push_back(data::normalize(mu));
    log_priors_.reserve(world.priors.size());
    for (double p : world.priors) log_priors_.push_back(std::log(p));
}

Vec AnalyticGmmDenoiser::posterior_mean(const Vec& x_hat, double sigma) const {
    if (!(sigma > 0.0)) throw std::domain_error("posterior_mean: sigma must be > 0");
    const double s2 = gamma_ * gamma_ + sigma * sigma;
    // responsibilities in log space
    Vec logits(means_.size());
    for (std::size_t c = 0; c < means_.size(); ++c) {
        double sq = 0.0;
        for (std::size_t j = 0; j < x_hat.size(); ++j) {
            double diff = x_hat[j] - means_[c][j];
            sq += diff * diff;
        }
        logits[c] = log_priors_[c] - 0.5 * sq / s2;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double norm = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        norm += l;
    }
    const double g2 = gamma_ * gamma_;
    const double shrink = g2 / s2;
    Vec out(x_hat.size(), 0.0);
    for (std::size_t c = 0; c < means_.size(); ++c) {
        double r = logits[c] / norm;
        double w_mu = r * (1.0 - shrink);
        for (std::size_t j = 0; j < x_hat.size(); ++j) {
            out[j] += r * shrink * x_hat[j] + w_mu * means_[c][j];
        }
    }
    return out;
}

Vec AnalyticGmmDenoiser::posterior_mean_vjp(const Vec& x_hat, double sigma,
                                            const Vec& upstream) const {
    const double s2 = gamma_ * gamma_ + sigma * sigma;
    const double g2 = gamma_ * gamma_;
    const double shrink = g2 / s2;
    Vec logits(means_.size());
    for (std::size_t c = 0; c < means_.size(); ++c) {
        double sq = 0.0;
        for (std::size_t j = 0; j < x_hat.size(); ++j) {
            double diff = x_hat[j] - means_[c][j];
            sq += diff * diff;
        }
        logits[c] = log_priors_[c] - 0.5 * sq / s2;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double norm = 0.0;
    Vec resp(means_.size());
    for (std::size_t c = 0; c < means_.size(); ++c) {
        resp[c] = std::exp(logits[c] - mx);
        norm += resp[c];
    }
    for (double& r : resp) r /= norm;

    // mean of the component means under the responsibilities
    Vec mu_bar(x_hat.size(), 0.0);
    for (std::size_t c = 0; c < means_.size(); ++c) {
        for (std::size_t j = 0; j < x_hat.size(); ++j) mu_bar[j] += resp[c] * means_[c][j];
    }
    // J^T u = shrink * u + sum_c resp_c (m_c . u) (mu_c - mu_bar) / s2,
    // with m_c the per-component posterior mean.
    Vec out(x_hat.size());
    for (std::size_t j = 0; j < x_hat.size(); ++j) out[j] = shrink * upstream[j];
    for (std::size_t c = 0; c < means_.size(); ++c) {
        double dot = 0.0;
        for (std::size_t j = 0; j < x_hat.size(); ++j) {
            double m_cj = shrink * x_hat[j] + (1.0 - shrink) * means_[c][j];
            dot += m_cj * upstream[j];
        }
        double coef = resp[c] * dot / s2;
        for (std::size_t j = 0; j < x_hat.size(); ++j) {
            out[j] += coef * (means_[c][j] - mu_bar[j]);
        }
    }
    return out;
}

Vec AnalyticGmmDenoiser::eps(const Vec& x_t, int, const Conditioning&, const Vec&, int,
                             double sigma) const {
    if (!(sigma > 0.0)) throw std::domain_error("AnalyticGmmDenoiser: sigma must be > 0");
    // reconstruct x_hat from the scaled input: x_hat = x_t / sqrt(abar)
    const double inv_scale = std::sqrt(1.0 + sigma * sigma);
    Vec x_hat(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) x_hat[i] = inv_scale * x_t[i];
    Vec pm = posterior_mean(x_hat, sigma);
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = (x_hat[i] - pm[i]) / sigma;
    return out;
}

void AnalyticGmmDenoiser::eps_vjp(const Vec& x_t, int, const Conditioning&, const Vec&,
                                 int, double sigma, const Vec& upstream, Vec& grad_x_t,
                                 Vec& grad_x_bar) const {
    const double inv_scale = std::sqrt(1.0 + sigma * sigma);
    Vec x_hat(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) x_hat[i] = inv_scale * x_t[i];
    Vec jt_u = posterior_mean_vjp(x_hat, sigma, upstream);
    grad_x_t.assign(x_t.size(), 0.0);
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        grad_x_t[i] = inv_scale * (upstream[i] - jt_u[i]) / sigma;
    }
    grad_x_bar.assign(x_t.size(), 0.0);
}

Vec timestep_embedding(int t, int T, int dim) {
    Vec emb(static_cast<std::size_t>(dim));
    double u = static_cast<double>(t) / static_cast<double>(T);
    for (int i = 0; i < dim / 2; ++i) {
        double freq = std::pow(2.0, i);
        emb[static_cast<std::size_t>(2 * i)] = std::sin(u * freq);
        emb[static_cast<std::size_t>(2 * i + 1)] = std::cos(u * freq);
    }
    return emb;
}

NeuralDenoiser::NeuralDenoiser(int d, int num_classes, int hidden, int T,
                               std::uint64_t seed)
    : d_(d), T_(T) {
    std::size_t in_dim = 2 * static_cast<std::size_t>(d) + 2 * kTimeDim + kCondDim;
    mlp_ = nn::make_mlp({in_dim, static_cast<std::size_t>(hidden), static_cast<std::size_t>(d)},
                        {nn::Activation::Tanh, nn::Activation::Identity}, seed);
    token_embed_ = nn::Matrix(static_cast<std::size_t>(2 + num_classes), kCondDim);
    rng::Stream rs = rng::substream(seed, {0x746f6bULL});
    for (double& v : token_embed_.a) v = 0.1 * (2.0 * rs.next_unit() - 1.0);
}

NeuralDenoiser::NeuralDenoiser(nn::Mlp mlp, nn::Matrix token_embed, int T)
    : mlp_(std::move(mlp)), token_embed_(std::move(token_embed)), T_(T) {
    d_ = static_cast<int>(mlp_.output_dim());
}

int NeuralDenoiser::token_row(const Conditioning& cond) const {
    switch (cond.kind) {
        case Conditioning::Kind::Empty:
            return kTokenEmpty;
        case Conditioning::Kind::Adapt:
            return kTokenAdapt;
        case Conditioning::Kind::Class:
            if (cond.class_index < 0 ||
                static_cast<std::size_t>(cond.class_index) + 2 >= token_embed_.rows) {
                throw std::invalid_argument("NeuralDenoiser: unknown class token");
            }
            return 2 + cond.class_index;
    }
    throw std::invalid_argument("NeuralDenoiser: unknown conditioning token");
}

Vec NeuralDenoiser::assemble_input(const Vec& x_t, int t, const Conditioning& cond,
                                   const Vec& x_bar, int t_prime) const {
    if (x_t.size() != static_cast<std::size_t>(d_) || x_bar.size() != x_t.size()) {
        throw std::invalid_argument("NeuralDenoiser: input dimension mismatch");
    }
    int row = token_row(cond);
    Vec in;
    in.reserve(mlp_.input_dim());
    in.insert(in.end(), x_t.begin(), x_t.end());
    in.insert(in.end(), x_bar.begin(), x_bar.end());
    Vec te = timestep_embedding(t, T_, kTimeDim);
    in.insert(in.end(), te.begin(), te.end());
    Vec tpe = timestep_embedding(t_prime, T_, kTimeDim);
    in.insert(in.end(), tpe.begin(), tpe.end());
    for (int j = 0; j < kCondDim; ++j) {
        in.push_back(token_embed_.at(static_cast<std::size_t>(row), static_cast<std::size_t>(j)));
    }
    return in;
}

Vec NeuralDenoiser::eps(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar,
                        int t_prime, double) const {
    return nn::forward(mlp_, assemble_input(x_t, t, cond, x_bar, t_prime));
}

void NeuralDenoiser::eps_vjp(const Vec& x_t, int t, const Conditioning& cond,
                            const Vec& x_bar, int t_prime, double, const Vec& upstream,
                            Vec& grad_x_t, Vec& grad_x_bar) const {
    nn::MlpGrads g = nn::backward(mlp_, assemble_input(x_t, t, cond, x_bar, t_prime), upstream);
    grad_x_t.assign(g.input.begin(), g.input.begin() + d_);
    grad_x_bar.assign(g.input.begin() + d_, g.input.begin() + 2 * d_);
}

NeuralDenoiserGrads NeuralDenoiser::backward(const Vec& x_t, int t, const Conditioning& cond,
                                             const Vec& x_bar, int t_prime,
                                             const Vec& upstream) const {
    NeuralDenoiserGrads out;
    out.mlp = nn::backward(mlp_, assemble_input(x_t, t, cond, x_bar, t_prime), upstream);
    out.x_t_grad.assign(out.mlp.input.begin(), out.mlp.input.begin() + d_);
    out.x_bar_grad.assign(out.mlp.input.begin() + d_, out.mlp.input.begin() + 2 * d_);
    std::size_t cond_off = mlp_.input_dim() - kCondDim;
    out.token_grad.assign(out.mlp.input.begin() + static_cast<long>(cond_off),
                          out.mlp.input.end());
    return out;
}

void NeuralDenoiser::apply_sgd(const NeuralDenoiserGrads& grads, const Conditioning& cond,
                               double lr, double momentum, NeuralSgdState& state) {
    nn::sgd_step(mlp_, grads.mlp, lr, momentum, state.mlp);
    if (state.embed_velocity.a.empty()) {
        state.embed_velocity = nn::Matrix(token_embed_.rows, token_embed_.cols);
    }
    int row = token_row(cond);
    for (int j = 0; j < kCondDim; ++j) {
        double g = grads.token_grad[static_cast<std::size_t>(j)];
        if (!std::isfinite(g)) throw TrainingError("NeuralDenoiser: non-finite embedding grad");
        double& v = state.embed_velocity.at(static_cast<std::size_t>(row),
                                            static_cast<std::size_t>(j));
        v = momentum * v + g;
        token_embed_.at(static_cast<std::size_t>(row), static_cast<std::size_t>(j)) -= lr * v;
    }
}

void save_denoiser(const NeuralDenoiser& den, const std::string& path,
                   schedule::ScheduleKind sched_kind, double k) {
    nn::Mlp combined = den.mlp();
    nn::Layer embed;
    embed.w = den.token_embed();
    embed.b.assign(den.token_embed().rows, 0.0);
    embed.act = nn::Activation::Identity;
    combined.layers.push_back(std::move(embed));
    nn::save_mlp(combined, path);

    std::ofstream meta(path + ".meta");
    if (!meta) throw DataError("save_denoiser: cannot open " + path + ".meta");
    meta << "schedule.kind = " << schedule::to_string(sched_kind) << "\n";
    meta << "schedule.T = " << den.horizon() << "\n";
    meta << "k = " << k << "\n";
    meta << "tokens = " << den.token_embed().rows << "\n";
    meta << "cond_dim = " << NeuralDenoiser::kCondDim << "\n";
    meta << "time_dim = " << NeuralDenoiser::kTimeDim << "\n";
}

NeuralDenoiser load_denoiser(const std::string& path) {
    nn::Mlp combined = nn::load_mlp(path);
    if (combined.layers.size() < 2) throw DataError("load_denoiser: malformed checkpoint");

    std::ifstream meta(path + ".meta");
    if (!meta) throw DataError("load_denoiser: missing sidecar " + path + ".meta");
    int T = 0;
    std::string line;
    while (std::getline(meta, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        key.erase(key.find_last_not_of(" \t") + 1);
        if (key == "schedule.T") T = std::stoi(line.substr(eq + 1));
    }
    if (T < 2) throw DataError("load_denoiser: sidecar lacks schedule.T");

    nn::Matrix token_embed = combined.layers.back().w;
    combined.layers.pop_back();
    return NeuralDenoiser(std::move(combined), std::move(token_embed), T);
}

Vec blur3(const Vec& x) {
    const std::size_t n = x.size();
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double left = x[i == 0 ? 0 : i - 1];
        double right = x[i + 1 == n ? n - 1 : i + 1];
        out[i] = 0.25 * left + 0.5 * x[i] + 0.25 * right;
    }
    return out;
}

NeuralDenoiser pretrain_denoiser(const data::GmmWorld& world,
                                 const schedule::NoiseSchedule& sched,
                                 const PretrainConfig& cfg,
                                 std::vector<double>* loss_curve) {
    NeuralDenoiser den(world.d, world.K, cfg.hidden, sched.T, cfg.seed);
    NeuralSgdState state;
    const Conditioning cond = Conditioning::empty();
    for (int step = 0; step < cfg.steps; ++step) {
        nn::MlpGrads mlp_acc = nn::zero_grads(den.mlp());
        Vec token_acc(NeuralDenoiser::kCondDim, 0.0);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            rng::Stream rs = rng::substream(
                cfg.seed, {0x707265ULL, static_cast<std::uint64_t>(step),
                           static_cast<std::uint64_t>(b)});
            // clean sample in model space
            int label = rs.next_int(0, world.K - 1);
            Vec x(static_cast<std::size_t>(world.d));
            for (int j = 0; j < world.d; ++j) {
                double v = world.means[static_cast<std::size_t>(label)][static_cast<std::size_t>(j)] +
                           world.gamma * rs.next_gaussian();
                x[static_cast<std::size_t>(j)] = std::clamp(v, 0.0, 1.0);
            }
            Vec xm = data::normalize(x);

            int t = rs.next_int(1, sched.T);
            Vec noise = rs.gaussian_vec(xm.size());
            Vec x_t = forward_diffuse(xm, t, noise, sched);

            // conditioning pathway: blurred variant at its own timestep
            int t_prime = rs.next_int(0, sched.T);
            Vec noise_bar = rs.gaussian_vec(xm.size());
            Vec x_bar = forward_diffuse(blur3(xm), t_prime, noise_bar, sched);

            Vec eps_hat = den.eps(x_t, t, cond, x_bar, t_prime, 0.0);
            Vec upstream(eps_hat.size());
            double loss = 0.0;
            for (std::size_t i = 0; i < eps_hat.size(); ++i) {
                double diff = eps_hat[i] - noise[i];
                loss += diff * diff;
                upstream[i] = 2.0 * diff / cfg.batch;
            }
            batch_loss += loss / cfg.batch;
            NeuralDenoiserGrads g = den.backward(x_t, t, cond, x_bar, t_prime, upstream);
            nn::accumulate(mlp_acc, g.mlp, 1.0);
            for (int j = 0; j < NeuralDenoiser::kCondDim; ++j) {
                token_acc[static_cast<std::size_t>(j)] += g.token_grad[static_cast<std::size_t>(j)];
            }
        }
        if (!std::isfinite(batch_loss)) {
            throw TrainingError("pretrain_denoiser: non-finite loss at step " +
                                std::to_string(step));
        }
        if (loss_curve) loss_curve->push_back(batch_loss);
        NeuralDenoiserGrads packed;
        packed.mlp = std::move(mlp_acc);
        packed.token_grad = std::move(token_acc);
        den.apply_sgd(packed, cond, cfg.lr, cfg.momentum, state);
    }
    return den;
}

double denoiser_mse(const Denoiser& den, const data::GmmWorld& world,
                    const schedule::NoiseSchedule& sched,
                    const schedule::CorrectionFactor& k, const Conditioning& cond,
                    double sigma_input, int n_draws, std::uint64_t seed) {
    const double sigma_eff = schedule::effective_sigma(sigma_input);
    double total = 0.0;
    for (int i = 0; i < n_draws; ++i) {
        rng::Stream rs = rng::substream(seed, {0x6d7365ULL, static_cast<std::uint64_t>(i)});
        int label = rs.next_int(0, world.K - 1);
        Vec x(static_cast<std::size_t>(world.d));
        for (int j = 0; j < world.d; ++j) {
            double v = world.means[static_cast<std::size_t>(label)][static_cast<std::size_t>(j)] +
                       world.gamma * rs.next_gaussian();
            x[static_cast<std::size_t>(j)] = std::clamp(v, 0.0, 1.0);
        }
        Vec xm = data::normalize(x);
        Vec x_hat(xm.size());
        for (std::size_t j = 0; j < xm.size(); ++j) {
            x_hat[j] = xm[j] + sigma_eff * rs.next_gaussian();
        }
        Vec recon = denoise_one_step(den, x_hat, sigma_eff, sched, k, cond);
        for (std::size_t j = 0; j < xm.size(); ++j) {
            double diff = recon[j] - xm[j];
            total += diff * diff;
        }
    }
    return total / (static_cast<double>(n_draws) * world.d);
}

}  // namespace certismooth::denoiser
