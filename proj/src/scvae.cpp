#include "flowrecon/scvae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "flowrecon/frc_io.hpp"
#include "flowrecon/metrics.hpp"
#include "flowrecon/rng.hpp"

namespace flowrecon {

using nlohmann::json;
using nn::Tensor;

std::vector<double> reparameterize(const LatentGaussian& g, const std::vector<double>& eps) {
    if (eps.size() != g.mean.size() || g.log_variance.size() != g.mean.size()) {
        throw std::invalid_argument("reparameterize: dimension mismatch");
    }
    std::vector<double> z(g.mean.size());
    for (std::size_t d = 0; d < z.size(); ++d) {
        z[d] = g.mean[d] + std::exp(0.5 * g.log_variance[d]) * eps[d];
    }
    return z;
}

double kl_closed_form(const LatentGaussian& g) {
    double kl = 0.0;
    for (std::size_t d = 0; d < g.mean.size(); ++d) {
        const double mu = g.mean[d];
        const double lv = g.log_variance[d];
        kl += mu * mu + std::exp(lv) - lv - 1.0;
    }
    return 0.5 * kl;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (mc_samples < 1) throw std::invalid_argument("TrainConfig: mc_samples must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
}

std::pair<double, double> adaptive_weights(const std::vector<TermMagnitudes>& history,
                                           const TrainConfig& cfg) {
    if (history.empty()) {
        throw std::invalid_argument("adaptive_weights: needs at least one recorded epoch");
    }
    const TermMagnitudes& last = history.back();
    const double a_rec = std::abs(last.reconstruction);
    const double a_kl = std::abs(last.kl);
    const double a_div = cfg.lambda_mode == LambdaMode::off ? 0.0 : std::abs(last.divergence);
    const double denom = a_rec + a_kl + a_div;
    const double beta_raw = denom > 0.0 ? a_kl / denom : 1.0;
    const double lambda_raw = denom > 0.0 ? a_div / denom : 1.0;
    const double beta = std::clamp(beta_raw, cfg.beta_min, cfg.beta_max);
    const double lambda = cfg.lambda_mode == LambdaMode::off
                              ? 0.0
                              : std::clamp(lambda_raw, cfg.lambda_min, cfg.lambda_max);
    return {beta, lambda};
}

Tensor state_to_tensor(const Grid& grid, const std::vector<double>& x) {
    const int n = grid.n_points();
    if (static_cast<int>(x.size()) != 2 * n) {
        throw std::invalid_argument("state_to_tensor: state length mismatch");
    }
    Tensor t({grid.ny, grid.nx, 2});
    for (int k = 0; k < n; ++k) {
        t.data[static_cast<std::size_t>(k) * 2] = x[static_cast<std::size_t>(k)];
        t.data[static_cast<std::size_t>(k) * 2 + 1] = x[static_cast<std::size_t>(n + k)];
    }
    return t;
}

std::vector<double> tensor_to_state(const Grid& grid, const Tensor& t) {
    const int n = grid.n_points();
    if (t.shape != std::vector<int>{grid.ny, grid.nx, 2}) {
        throw std::invalid_argument("tensor_to_state: tensor shape mismatch");
    }
    std::vector<double> x(static_cast<std::size_t>(2 * n));
    for (int k = 0; k < n; ++k) {
        x[static_cast<std::size_t>(k)] = t.data[static_cast<std::size_t>(k) * 2];
        x[static_cast<std::size_t>(n + k)] = t.data[static_cast<std::size_t>(k) * 2 + 1];
    }
    return x;
}

ScvaeModel::ScvaeModel(ScvaeArchitecture arch, Grid grid, SensorLayout layout,
                       ScalingParams scaling, std::uint64_t init_seed)
    : arch_(std::move(arch)),
      grid_(grid),
      layout_(std::move(layout)),
      scaling_(scaling),
      div_(grid) {
    if (arch_.input_shape != std::vector<int>{grid_.ny, grid_.nx, 2}) {
        throw std::invalid_argument("ScvaeModel: architecture input shape does not match grid");
    }
    if (arch_.n_measurements != 2 * layout_.size()) {
        throw std::invalid_argument("ScvaeModel: architecture measurement width != 2M");
    }
    if (arch_.latent_dim < 1) throw std::invalid_argument("ScvaeModel: latent_dim must be >= 1");

    for (const auto& s : arch_.encoder) encoder_trunk_.add(s);
    {
        nn::LayerSpec head;
        head.kind = "dense";
        head.units = arch_.latent_dim;
        mean_head_.add(head);
        logvar_head_.add(head);
    }
    for (const auto& s : arch_.decoder) decoder_.add(s);

    Rng enc_rng(derive_seed(init_seed, "encoder"));
    const auto trunk_out = encoder_trunk_.build(arch_.input_shape, enc_rng);
    if (trunk_out.size() != 1) {
        throw std::invalid_argument("ScvaeModel: encoder trunk must end in a flat layer");
    }
    Rng mean_rng(derive_seed(init_seed, "mean-head"));
    mean_head_.build(trunk_out, mean_rng);
    Rng logvar_rng(derive_seed(init_seed, "logvar-head"));
    logvar_head_.build(trunk_out, logvar_rng);

    Rng dec_rng(derive_seed(init_seed, "decoder"));
    const auto dec_out = decoder_.build({arch_.latent_dim}, dec_rng);
    if (dec_out != arch_.input_shape) {
        throw std::invalid_argument("ScvaeModel: decoder output shape " + nn::shape_string(dec_out) +
                                    " != snapshot shape " + nn::shape_string(arch_.input_shape));
    }

    encoder_trunk_.register_params(params_, "encoder");
    mean_head_.register_params(params_, "mean_head");
    logvar_head_.register_params(params_, "logvar_head");
    decoder_.register_params(params_, "decoder");
}

LatentGaussian ScvaeModel::encode(const std::vector<double>& x_scaled) {
    const Tensor t = state_to_tensor(grid_, x_scaled);
    const Tensor trunk = encoder_trunk_.forward(t, false);
    LatentGaussian g;
    g.mean = mean_head_.forward(trunk, false).data;
    g.log_variance = logvar_head_.forward(trunk, false).data;
    return g;
}

LatentGaussian ScvaeModel::encode_with_gradients(const std::vector<double>& x_scaled,
                                                 const std::vector<double>& d_mean,
                                                 const std::vector<double>& d_logvar) {
    if (static_cast<int>(d_mean.size()) != arch_.latent_dim ||
        static_cast<int>(d_logvar.size()) != arch_.latent_dim) {
        throw std::invalid_argument("encode_with_gradients: cotangent length mismatch");
    }
    const Tensor t = state_to_tensor(grid_, x_scaled);
    const Tensor trunk = encoder_trunk_.forward(t, true);
    LatentGaussian g;
    g.mean = mean_head_.forward(trunk, true).data;
    g.log_variance = logvar_head_.forward(trunk, true).data;
    const Tensor g1 = mean_head_.backward(Tensor({arch_.latent_dim}, d_mean));
    const Tensor g2 = logvar_head_.backward(Tensor({arch_.latent_dim}, d_logvar));
    Tensor gt = g1;
    for (std::size_t i = 0; i < gt.size(); ++i) gt.data[i] += g2.data[i];
    encoder_trunk_.backward(gt);
    return g;
}

std::vector<double> ScvaeModel::decode(const std::vector<double>& z,
                                       const std::vector<double>& m_scaled) {
    if (static_cast<int>(z.size()) != arch_.latent_dim) {
        throw std::invalid_argument("ScvaeModel::decode: latent length mismatch");
    }
    if (static_cast<int>(m_scaled.size()) != arch_.n_measurements) {
        throw std::invalid_argument("ScvaeModel::decode: measurement length mismatch");
    }
    decoder_.set_aux(m_scaled);
    const Tensor out = decoder_.forward(Tensor({arch_.latent_dim}, z), false);
    return tensor_to_state(grid_, out);
}

std::vector<double> ScvaeModel::decode_with_gradients(const std::vector<double>& z,
                                                      const std::vector<double>& m_scaled,
                                                      const std::vector<double>& cotangent) {
    if (static_cast<int>(cotangent.size()) != grid_.n_state()) {
        throw std::invalid_argument("decode_with_gradients: cotangent length mismatch");
    }
    decoder_.set_aux(m_scaled);
    decoder_.forward(Tensor({arch_.latent_dim}, z), true);
    return decoder_.backward(state_to_tensor(grid_, cotangent)).data;
}

std::vector<double> ScvaeModel::predict_state_scaled(const std::vector<double>& m_scaled) {
    return decode(std::vector<double>(static_cast<std::size_t>(arch_.latent_dim), 0.0), m_scaled);
}

LossBreakdown ScvaeModel::elbo(const std::vector<double>& x_scaled,
                               const std::vector<double>& m_scaled, double beta, double lambda,
                               bool lambda_active,
                               const std::vector<std::vector<double>>& eps_draws,
                               bool accumulate_gradients) {
    if (eps_draws.empty()) throw std::invalid_argument("elbo: needs at least one latent draw");
    const int n2 = grid_.n_state();
    const int n = grid_.n_points();
    const double n_draws = static_cast<double>(eps_draws.size());

    const Tensor x_tensor = state_to_tensor(grid_, x_scaled);
    const Tensor trunk = encoder_trunk_.forward(x_tensor, accumulate_gradients);
    const Tensor mean_t = mean_head_.forward(trunk, accumulate_gradients);
    const Tensor logvar_t = logvar_head_.forward(trunk, accumulate_gradients);
    LatentGaussian g{mean_t.data, logvar_t.data};

    decoder_.set_aux(m_scaled);

    double recon_sum = 0.0;
    double div_sum = 0.0;
    std::vector<double> d_mean(g.mean.size(), 0.0);
    std::vector<double> d_logvar(g.mean.size(), 0.0);

    for (const auto& eps : eps_draws) {
        const std::vector<double> z = reparameterize(g, eps);
        const Tensor x_hat_t = decoder_.forward(Tensor({arch_.latent_dim}, z),
                                                accumulate_gradients);
        const std::vector<double> x_hat = tensor_to_state(grid_, x_hat_t);

        double sq = 0.0;
        for (int k = 0; k < n2; ++k) {
            const double d = x_scaled[static_cast<std::size_t>(k)] - x_hat[static_cast<std::size_t>(k)];
            sq += d * d;
        }
        recon_sum += -sq / (2.0 * static_cast<double>(n2));

        std::vector<double> div_field;
        if (lambda_active) {
            div_field = div_.apply_weighted(x_hat, scaling_.u_halfwidth, scaling_.v_halfwidth);
            double dsq = 0.0;
            for (const double v : div_field) dsq += v * v;
            div_sum += -dsq / static_cast<double>(n);
        }

        if (accumulate_gradients) {
            // gradient of the minimized loss -total w.r.t. x_hat
            std::vector<double> gx(static_cast<std::size_t>(n2));
            const double wr = 1.0 / (static_cast<double>(n2) * n_draws);
            for (int k = 0; k < n2; ++k) {
                gx[static_cast<std::size_t>(k)] = wr * (x_hat[static_cast<std::size_t>(k)] -
                                                        x_scaled[static_cast<std::size_t>(k)]);
            }
            if (lambda_active && lambda != 0.0) {
                const auto gdiv = div_.apply_weighted_adjoint(div_field, scaling_.u_halfwidth,
                                                              scaling_.v_halfwidth);
                const double wd = 2.0 * lambda / (static_cast<double>(n) * n_draws);
                for (int k = 0; k < n2; ++k) gx[static_cast<std::size_t>(k)] += wd *
                    gdiv[static_cast<std::size_t>(k)];
            }
            const Tensor gz_t = decoder_.backward(state_to_tensor(grid_, gx));
            for (std::size_t d = 0; d < d_mean.size(); ++d) {
                d_mean[d] += gz_t.data[d];
                d_logvar[d] += gz_t.data[d] * eps[d] * 0.5 * std::exp(0.5 * g.log_variance[d]);
            }
        }
    }

    LossBreakdown out;
    out.reconstruction_term = recon_sum / n_draws;
    out.divergence_term = lambda_active ? div_sum / n_draws : 0.0;
    out.kl_term = kl_closed_form(g);
    out.beta = beta;
    out.lambda = lambda_active ? lambda : 0.0;
    out.total = out.reconstruction_term + out.lambda * out.divergence_term - beta * out.kl_term;

    if (accumulate_gradients) {
        for (std::size_t d = 0; d < d_mean.size(); ++d) {
            d_mean[d] += beta * g.mean[d];
            d_logvar[d] += beta * 0.5 * (std::exp(g.log_variance[d]) - 1.0);
        }
        const Tensor g1 = mean_head_.backward(Tensor({arch_.latent_dim}, d_mean));
        const Tensor g2 = logvar_head_.backward(Tensor({arch_.latent_dim}, d_logvar));
        Tensor gt = g1;
        for (std::size_t i = 0; i < gt.size(); ++i) gt.data[i] += g2.data[i];
        encoder_trunk_.backward(gt);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

double validation_objective(ScvaeModel& model, const std::vector<std::vector<double>>& val_m_scaled,
                            const std::vector<std::vector<double>>& val_truth_raw) {
    double total = 0.0;
    for (std::size_t i = 0; i < val_m_scaled.size(); ++i) {
        const auto pred = unscale_state(model.scaling(), model.predict_state_scaled(val_m_scaled[i]));
        double sq = 0.0, norm = 0.0;
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const double d = pred[k] - val_truth_raw[i][k];
            sq += d * d;
            norm += val_truth_raw[i][k] * val_truth_raw[i][k];
        }
        total += std::sqrt(sq) / std::sqrt(norm);
    }
    return total / static_cast<double>(val_m_scaled.size());
}

} // namespace

TrainResult train_scvae(const FlowSeries& train, const FlowSeries& validation,
                        const SensorLayout& layout, const ScvaeArchitecture& arch,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (train.size() == 0 || validation.size() == 0) {
        throw std::invalid_argument("train_scvae: train and validation must be nonempty");
    }
    const Grid grid = train.grid;
    const SamplingOperator op(layout, grid);
    const ScalingParams scaling = compute_scaling(train);

    auto model = std::make_unique<ScvaeModel>(arch, grid, layout, scaling,
                                              derive_seed(cfg.seed, "init"));

    // Precompute scaled states and measurements once.
    std::vector<std::vector<double>> x_scaled, m_scaled;
    x_scaled.reserve(train.size());
    m_scaled.reserve(train.size());
    for (const auto& s : train.snapshots) {
        x_scaled.push_back(scale_state(scaling, flatten_state(s)));
        m_scaled.push_back(op.apply(x_scaled.back()));
    }
    std::vector<std::vector<double>> val_m_scaled, val_truth_raw;
    val_m_scaled.reserve(validation.size());
    val_truth_raw.reserve(validation.size());
    for (const auto& s : validation.snapshots) {
        val_truth_raw.push_back(flatten_state(s));
        val_m_scaled.push_back(op.apply(scale_state(scaling, val_truth_raw.back())));
    }

    nn::AdamState adam(model->params(), cfg.optimizer);
    const bool lambda_active = cfg.lambda_mode == LambdaMode::adaptive;

    double beta = cfg.beta_mode == BetaMode::fixed ? cfg.beta_fixed : 1.0;
    double lambda = lambda_active ? 1.0 : 0.0;

    std::vector<TermMagnitudes> history;
    std::vector<TrainLogRow> log;
    std::vector<double> best_params;
    double best_val = 0.0;
    int best_epoch = -1;
    int epochs_run = 0;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (cfg.beta_mode == BetaMode::adaptive || lambda_active) {
            if (!history.empty()) {
                const auto [b, l] = adaptive_weights(history, cfg);
                if (cfg.beta_mode == BetaMode::adaptive) beta = b;
                if (lambda_active) lambda = l;
            }
        }

        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.uniform_index(i + 1);
            std::swap(order[i], order[j]);
        }
        Rng noise_rng(derive_seed(cfg.seed, "noise", static_cast<std::uint64_t>(epoch)));

        TermMagnitudes sums;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(),
                                              start + static_cast<std::size_t>(cfg.batch_size));
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t idx = order[b];
                std::vector<std::vector<double>> eps(static_cast<std::size_t>(cfg.mc_samples));
                for (auto& e : eps) {
                    e.resize(static_cast<std::size_t>(arch.latent_dim));
                    for (double& v : e) v = noise_rng.normal();
                }
                const LossBreakdown lb = model->elbo(x_scaled[idx], m_scaled[idx], beta, lambda,
                                                     lambda_active, eps, true);
                if (!std::isfinite(lb.total)) {
                    throw std::runtime_error(
                        "train_scvae: non-finite objective at epoch " + std::to_string(epoch) +
                        " (recon=" + std::to_string(lb.reconstruction_term) +
                        ", kl=" + std::to_string(lb.kl_term) + ")");
                }
                sums.reconstruction += lb.reconstruction_term;
                sums.kl += lb.kl_term;
                sums.divergence += lb.divergence_term;
            }
            // minibatch estimator: mean over the batch (the K/R sum rescales
            // the objective by a constant the optimizer is insensitive to)
            model->params().scale_grads(1.0 / static_cast<double>(stop - start));
            adam.step(model->params());
        }

        const double inv_k = 1.0 / static_cast<double>(train.size());
        TermMagnitudes epoch_means{sums.reconstruction * inv_k, sums.kl * inv_k,
                                   sums.divergence * inv_k};
        history.push_back(epoch_means);

        const double val_obj = validation_objective(*model, val_m_scaled, val_truth_raw);
        if (!std::isfinite(val_obj)) {
            throw std::runtime_error("train_scvae: non-finite validation objective at epoch " +
                                     std::to_string(epoch));
        }
        log.push_back(TrainLogRow{epoch, epoch_means.reconstruction, epoch_means.kl,
                                  epoch_means.divergence, beta, lambda, val_obj});
        epochs_run = epoch + 1;

        if (best_epoch < 0 || val_obj < best_val) {
            best_val = val_obj;
            best_epoch = epoch;
            best_params = model->params().snapshot_values();
        } else if (epoch - best_epoch >= cfg.patience) {
            break;
        }
    }

    model->params().restore_values(best_params);
    TrainResult result;
    result.model = std::move(model);
    result.log = std::move(log);
    result.best_epoch = best_epoch;
    result.epochs_trained = epochs_run;
    result.best_val_objective = best_val;
    return result;
}

// ---------------------------------------------------------------------------

PredictiveDistribution::PredictiveDistribution(std::shared_ptr<ScvaeModel> model,
                                               std::vector<double> m_raw)
    : model_(std::move(model)), m_raw_(std::move(m_raw)) {
    if (static_cast<int>(m_raw_.size()) != model_->n_measurements()) {
        throw std::invalid_argument("PredictiveDistribution: measurement length mismatch");
    }
    m_scaled_ = scale_measurements(model_->scaling(), m_raw_);
}

std::vector<double> PredictiveDistribution::draw(const std::vector<double>& eps) {
    return unscale_state(model_->scaling(), model_->decode(eps, m_scaled_));
}

PredictiveDistribution predict(std::shared_ptr<ScvaeModel> model,
                               const std::vector<double>& m_raw) {
    return PredictiveDistribution(std::move(model), m_raw);
}

void write_training_log_csv(const std::filesystem::path& file,
                            const std::vector<TrainLogRow>& log) {
    std::ofstream f(file);
    f << "epoch,recon,kl,div,beta,lambda,val_objective\n";
    for (const auto& row : log) {
        f << row.epoch << "," << format_double(row.reconstruction) << ","
          << format_double(row.kl) << "," << format_double(row.divergence) << ","
          << format_double(row.beta) << "," << format_double(row.lambda) << ","
          << format_double(row.val_objective) << "\n";
    }
    if (!f) throw std::runtime_error("write_training_log_csv: cannot write " + file.string());
}

} // namespace flowrecon
