#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "flowrecon/adam.hpp"
#include "flowrecon/architecture.hpp"
#include "flowrecon/divergence.hpp"
#include "flowrecon/grid.hpp"
#include "flowrecon/sampler.hpp"
#include "flowrecon/sampling.hpp"
#include "flowrecon/scaling.hpp"

namespace flowrecon {

struct LatentGaussian {
    std::vector<double> mean;
    std::vector<double> log_variance;
};

/// z = mean + exp(log_variance / 2) * eps.
std::vector<double> reparameterize(const LatentGaussian& g, const std::vector<double>& eps);

/// KL(q || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - log sigma^2 - 1), >= 0.
double kl_closed_form(const LatentGaussian& g);

enum class LambdaMode { off, adaptive };
enum class BetaMode { fixed, adaptive };

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 50;
    int mc_samples = 1; // L in the sampled objective
    LambdaMode lambda_mode = LambdaMode::off;
    BetaMode beta_mode = BetaMode::adaptive;
    double beta_fixed = 1.0;
    double beta_min = 1e-4;
    double beta_max = 1.0;
    double lambda_min = 1e-4;
    double lambda_max = 1.0;
    std::uint64_t seed = 0;
    nn::AdamConfig optimizer;

    void validate() const;
};

/// One per-sample objective evaluation. Sign convention (maximization form):
/// total = reconstruction + lambda * divergence - beta * kl, where
/// reconstruction = -||x - x_hat||^2 / (2 * 2N), divergence = -||L_div x_hat||^2 / N
/// (physical divergence via the scaling weights; zero when the lambda mode is
/// off), both averaged over the L latent draws.
struct LossBreakdown {
    double reconstruction_term = 0.0;
    double divergence_term = 0.0;
    double kl_term = 0.0;
    double beta = 0.0;
    double lambda = 0.0;
    double total = 0.0;
};

struct TermMagnitudes {
    double reconstruction = 0.0;
    double kl = 0.0;
    double divergence = 0.0;
};

/// Per-epoch weight update: each weighted term's share of the total magnitude
/// becomes its weight, beta = |kl| / sum, lambda = |div| / sum, clamped to
/// [beta_min, beta_max] and [lambda_min, lambda_max]. A vanishing KL term
/// therefore relaxes beta toward beta_min instead of pushing the latent
/// further toward the prior. Uses the most recent entry of the history.
std::pair<double, double> adaptive_weights(const std::vector<TermMagnitudes>& history,
                                           const TrainConfig& cfg);

struct TrainLogRow {
    int epoch = 0;
    double reconstruction = 0.0;
    double kl = 0.0;
    double divergence = 0.0;
    double beta = 0.0;
    double lambda = 0.0;
    double val_objective = 0.0;
};

/// Scaled snapshot state (u block, v block) <-> (H, W, 2) tensor with
/// channel 0 = u, channel 1 = v.
nn::Tensor state_to_tensor(const Grid& grid, const std::vector<double>& x);
std::vector<double> tensor_to_state(const Grid& grid, const nn::Tensor& t);

class ScvaeModel {
public:
    ScvaeModel(ScvaeArchitecture arch, Grid grid, SensorLayout layout, ScalingParams scaling,
               std::uint64_t init_seed);

    const Grid& grid() const { return grid_; }
    const SensorLayout& layout() const { return layout_; }
    const ScalingParams& scaling() const { return scaling_; }
    const ScvaeArchitecture& architecture() const { return arch_; }
    int latent_dim() const { return arch_.latent_dim; }
    int n_measurements() const { return arch_.n_measurements; }
    const DivergenceOperator& divergence() const { return div_; }

    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    /// Deterministic map from a scaled state to the latent Gaussian; the
    /// measurements never enter (semi-conditional structure, enforced by the
    /// signature).
    LatentGaussian encode(const std::vector<double>& x_scaled);

    /// encode() with gradient recording: accumulates the parameter gradients
    /// of <d_mean, mean> + <d_logvar, log_variance> into the store.
    LatentGaussian encode_with_gradients(const std::vector<double>& x_scaled,
                                         const std::vector<double>& d_mean,
                                         const std::vector<double>& d_logvar);

    /// Deterministic decoder: latent draw plus scaled measurements to a
    /// scaled state.
    std::vector<double> decode(const std::vector<double>& z,
                               const std::vector<double>& m_scaled);

    /// decode() with gradient recording: accumulates parameter gradients of
    /// <cotangent, decode(z, m)> and returns the gradient with respect to z.
    std::vector<double> decode_with_gradients(const std::vector<double>& z,
                                              const std::vector<double>& m_scaled,
                                              const std::vector<double>& cotangent);

    /// Objective for one sample with explicit latent noise draws (one per MC
    /// sample). When accumulate_gradients is set, parameter gradients of
    /// -total are accumulated into the store.
    LossBreakdown elbo(const std::vector<double>& x_scaled, const std::vector<double>& m_scaled,
                       double beta, double lambda, bool lambda_active,
                       const std::vector<std::vector<double>>& eps_draws,
                       bool accumulate_gradients = false);

    /// Prediction objective used for validation and test: decode at z = 0.
    std::vector<double> predict_state_scaled(const std::vector<double>& m_scaled);

private:
    ScvaeArchitecture arch_;
    Grid grid_;
    SensorLayout layout_;
    ScalingParams scaling_;
    DivergenceOperator div_;
    nn::Network encoder_trunk_;
    nn::Network mean_head_;
    nn::Network logvar_head_;
    nn::Network decoder_;
    nn::ParamStore params_;
};

struct TrainResult {
    std::unique_ptr<ScvaeModel> model;
    std::vector<TrainLogRow> log;
    int best_epoch = 0;
    int epochs_trained = 0;
    double best_val_objective = 0.0;
};

/// Minibatch Adam training with early stopping on the validation objective
/// (mean relative error of the z=0 prediction, unscaled); returns the model
/// restored to the best validation epoch. Scaling is computed from the
/// training split. Aborts with a diagnostic if the loss stops being finite.
TrainResult train_scvae(const FlowSeries& train, const FlowSeries& validation,
                        const SensorLayout& layout, const ScvaeArchitecture& arch,
                        const TrainConfig& cfg);

/// Posterior predictive handle p(x | m): draw(eps) decodes eps against the
/// fixed measurements and unscales. The encoder is never consulted.
class PredictiveDistribution : public PosteriorSampler {
public:
    PredictiveDistribution(std::shared_ptr<ScvaeModel> model, std::vector<double> m_raw);
    int state_dim() const override { return model_->grid().n_state(); }
    int latent_dim() const override { return model_->latent_dim(); }
    std::vector<double> draw(const std::vector<double>& eps) override;
    const std::vector<double>& measurements_raw() const { return m_raw_; }
    ScvaeModel& model() { return *model_; }

private:
    std::shared_ptr<ScvaeModel> model_;
    std::vector<double> m_raw_;
    std::vector<double> m_scaled_;
};

PredictiveDistribution predict(std::shared_ptr<ScvaeModel> model, const std::vector<double>& m_raw);

/// frcmodel-1 container: one-line JSON header + little-endian f64 parameter blob.
void save_scvae_model(const std::filesystem::path& file, const ScvaeModel& model);
std::unique_ptr<ScvaeModel> load_scvae_model(const std::filesystem::path& file);

void write_training_log_csv(const std::filesystem::path& file,
                            const std::vector<TrainLogRow>& log);

} // namespace flowrecon
