#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "certismooth/data.hpp"
#include "certismooth/nn.hpp"
#include "certismooth/schedule.hpp"
#include "certismooth/types.hpp"

namespace certismooth::denoiser {

// Conditioning token: the empty template, the adaptation identifier, or a
// class token. Exactly one variant is active.
struct Conditioning {
    enum class Kind { Empty, Adapt, Class };
    Kind kind = Kind::Empty;
    int class_index = -1;

    static Conditioning empty() { return {Kind::Empty, -1}; }
    static Conditioning adapt() { return {Kind::Adapt, -1}; }
    static Conditioning klass(int c) { return {Kind::Class, c}; }
};

// Noise-estimator contract: eps(x_t, t, cond | x_bar, t'). sigma rides along
// with the query (it is part of DenoiseQuery) so that denoisers defined in
// x-hat space stay algebraically exact.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual Vec eps(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar,
                    int t_prime, double sigma) const = 0;

    // Vector-Jacobian product of eps w.r.t. its two image inputs.
    virtual void eps_vjp(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar,
                        int t_prime, double sigma, const Vec& upstream, Vec& grad_x_t,
                        Vec& grad_x_bar) const = 0;
};

// x_t = sqrt(abar_t) x + sqrt(1 - abar_t) noise.
Vec forward_diffuse(const Vec& x, int t, const Vec& noise,
                    const schedule::NoiseSchedule& sched);

// Single-step zero-shot denoising: x_tilde = x_hat - sigma * eps(sqrt(abar)
// x_hat, t_hat, cond | sqrt(abar) x_hat, k t_hat). The scaling abar is the
// exact Eq-6 inversion 1/(1 + sigma^2); the discrete schedule supplies only
// the conditioning indices t_hat, t'. No clamping here.
Vec denoise_one_step(const Denoiser& den, const Vec& x_hat, double sigma,
                     const schedule::NoiseSchedule& sched,
                     const schedule::CorrectionFactor& k, const Conditioning& cond);

// d(denoise_one_step)^T upstream / d(x_hat).
Vec denoise_one_step_vjp(const Denoiser& den, const Vec& x_hat, double sigma,
                         const schedule::NoiseSchedule& sched,
                         const schedule::CorrectionFactor& k, const Conditioning& cond,
                         const Vec& upstream);

// Posterior mean of x ~ N(mu, gamma^2 I) observed as x_hat = x + N(0, sigma^2 I):
// (gamma^2 x_hat + sigma^2 mu) / (gamma^2 + sigma^2).
Vec gaussian_posterior_mean(const Vec& mu, double gamma, double sigma, const Vec& x_hat);

class IdentityDenoiser final : public Denoiser {
public:
    Vec eps(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar, int t_prime,
            double sigma) const override;
    void eps_vjp(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar,
                int t_prime, double sigma, const Vec& upstream, Vec& grad_x_t,
                Vec& grad_x_bar) const override;
};

// Exact MSE-optimal denoiser for the GmmWorld, in model space: the
// responsibility-weighted sum of per-component conjugate posterior means,
// responsibilities computed in log space. Serves as the oracle standing in
// for a well-trained pretrained denoiser.
class AnalyticGmmDenoiser final : public Denoiser {
public:
    explicit AnalyticGmmDenoiser(const data::GmmWorld& world);

    Vec posterior_mean(const Vec& x_hat, double sigma) const;
    // Closed-form J^T u of posterior_mean.
    Vec posterior_mean_vjp(const Vec& x_hat, double sigma, const Vec& upstream) const;

    Vec eps(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar, int t_prime,
            double sigma) const override;
    void eps_vjp(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar,
                int t_prime, double sigma, const Vec& upstream, Vec& grad_x_t,
                Vec& grad_x_bar) const override;

private:
    std::vector<Vec> means_;  // model space, 2 mu - 1
    Vec log_priors_;
    double gamma_ = 0.0;  // model space, 2 gamma
    int d_ = 0;
};

// Sinusoidal embedding of t/T, interleaved sin/cos over dyadic frequencies.
Vec timestep_embedding(int t, int T, int dim);

struct NeuralDenoiserGrads {
    nn::MlpGrads mlp;
    Vec token_grad;  // gradient for the active embedding row
    Vec x_t_grad;
    Vec x_bar_grad;
};

struct NeuralSgdState {
    nn::SgdState mlp;
    nn::Matrix embed_velocity;
};

// Trainable self-conditioned denoiser. Input layout:
// [x_t | x_bar | embed(t) | embed(t') | token_embed(cond)] -> MLP -> eps.
// Token rows: 0 = empty, 1 = adaptation identifier, 2+c = class c.
class NeuralDenoiser final : public Denoiser {
public:
    static constexpr int kTimeDim = 16;
    static constexpr int kCondDim = 8;
    static constexpr int kTokenEmpty = 0;
    static constexpr int kTokenAdapt = 1;

    NeuralDenoiser(int d, int num_classes, int hidden, int T, std::uint64_t seed);
    NeuralDenoiser(nn::Mlp mlp, nn::Matrix token_embed, int T);

    Vec eps(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar, int t_prime,
            double sigma) const override;
    void eps_vjp(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar,
                int t_prime, double sigma, const Vec& upstream, Vec& grad_x_t,
                Vec& grad_x_bar) const override;

    // Full parameter + input gradients for training.
    NeuralDenoiserGrads backward(const Vec& x_t, int t, const Conditioning& cond,
                                 const Vec& x_bar, int t_prime, const Vec& upstream) const;

    void apply_sgd(const NeuralDenoiserGrads& grads, const Conditioning& cond, double lr,
                   double momentum, NeuralSgdState& state);

    int token_row(const Conditioning& cond) const;
    int data_dim() const { return d_; }
    int horizon() const { return T_; }
    nn::Mlp& mlp() { return mlp_; }
    const nn::Mlp& mlp() const { return mlp_; }
    nn::Matrix& token_embed() { return token_embed_; }
    const nn::Matrix& token_embed() const { return token_embed_; }

    Vec assemble_input(const Vec& x_t, int t, const Conditioning& cond, const Vec& x_bar,
                       int t_prime) const;

private:
    nn::Mlp mlp_;
    nn::Matrix token_embed_;  // [tokens x kCondDim]
    int d_ = 0;
    int T_ = 0;
};

// Checkpoint = nn binary with the token table appended as a trailing
// pseudo-layer, plus a plain-text ".meta" sidecar (schedule kind, T, k,
// embedding dims).
void save_denoiser(const NeuralDenoiser& den, const std::string& path,
                   schedule::ScheduleKind sched_kind, double k);
NeuralDenoiser load_denoiser(const std::string& path);

// Reflected box blur [1/4, 1/2, 1/4]; the flat-vector analogue of the
// low-resolution conditioning pathway.
Vec blur3(const Vec& x);

struct PretrainConfig {
    int steps = 2000;
    int batch = 32;
    int hidden = 128;
    double lr = 1e-2;
    double momentum = 0.9;
    double k = 1.8;
    std::uint64_t seed = 0;
};

// Pretrains the toy denoiser on world samples with the empty token. The
// conditioning image is a blurred variant diffused to its own independent
// timestep t', reproducing the super-resolution conditioning mismatch that
// the correction factor compensates for at deployment.
NeuralDenoiser pretrain_denoiser(const data::GmmWorld& world,
                                 const schedule::NoiseSchedule& sched,
                                 const PretrainConfig& cfg,
                                 std::vector<double>* loss_curve = nullptr);

// Mean per-coordinate squared reconstruction error in model space over
// n_draws noisy samples at input-space sigma.
double denoiser_mse(const Denoiser& den, const data::GmmWorld& world,
                    const schedule::NoiseSchedule& sched,
                    const schedule::CorrectionFactor& k, const Conditioning& cond,
                    double sigma_input, int n_draws, std::uint64_t seed);

}  // namespace certismooth::denoiser
