#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowrecon/experiment.hpp"
#include "flowrecon/frc_io.hpp"
#include "flowrecon/metrics.hpp"
#include "flowrecon/pod.hpp"
#include "flowrecon/scvae.hpp"
#include "flowrecon/split.hpp"
#include "flowrecon/stats.hpp"
#include "flowrecon/synthetic.hpp"
#include "flowrecon/uq.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flowrecon;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
};

int run(int argc, char** argv) {
    CLI::App app{"flowrecon: sparse flow-field reconstruction (SCVAE + regularized Gappy POD)"};
    app.require_subcommand(1);
    app.fallthrough(); // global --seed/--threads/--out may follow the subcommand

    GlobalOpts g;
    app.add_option("--seed", g.seed, "root random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads for experiment cells")
        ->capture_default_str();
    app.add_option("--out", g.out, "output path (file or directory, subcommand-specific)");

    // --- gen -------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a synthetic FRC1 dataset");
    std::string gen_recipe = "traveling_vortices";
    int gen_nx = 64, gen_ny = 32, gen_steps = 200, gen_kx = 1, gen_ky = 1;
    double gen_dx = 0.0, gen_dy = 0.0, gen_dt = 0.05, gen_t0 = 0.0, gen_amp = 1.0,
           gen_speed = 1.0;
    gen->add_option("--recipe", gen_recipe,
                    "taylor_green | traveling_vortices | random_fourier_solenoidal");
    gen->add_option("--nx", gen_nx);
    gen->add_option("--ny", gen_ny);
    gen->add_option("--dx", gen_dx, "grid spacing (default 2*pi/nx)");
    gen->add_option("--dy", gen_dy, "grid spacing (default 2*pi/ny)");
    gen->add_option("--steps", gen_steps);
    gen->add_option("--dt", gen_dt);
    gen->add_option("--t0", gen_t0);
    gen->add_option("--amplitude", gen_amp);
    gen->add_option("--kx", gen_kx);
    gen->add_option("--ky", gen_ky);
    gen->add_option("--phase-speed", gen_speed);

    // --- split -----------------------------------------------------------
    auto* split_cmd = app.add_subcommand("split", "split an FRC1 dataset into train/validation/test");
    std::string split_data, split_mode = "sequential";
    double split_test = 0.15, split_val = 0.30;
    split_cmd->add_option("--data", split_data, "FRC1 directory")->required();
    split_cmd->add_option("--mode", split_mode, "sequential | random");
    split_cmd->add_option("--test-frac", split_test);
    split_cmd->add_option("--val-frac", split_val);

    // --- pod -------------------------------------------------------------
    auto* pod_cmd = app.add_subcommand("pod", "compute a POD basis from training data");
    std::string pod_data;
    int pod_r = 8;
    bool pod_no_scaling = false;
    pod_cmd->add_option("--data", pod_data, "FRC1 directory (training split)")->required();
    pod_cmd->add_option("--r", pod_r, "number of components");
    pod_cmd->add_flag("--no-scaling", pod_no_scaling, "skip min-max scaling");

    // --- gpod ------------------------------------------------------------
    auto* gpod_cmd = app.add_subcommand("gpod", "Gappy-POD reconstruction of a test split");
    std::string gpod_data, gpod_sensors;
    int gpod_r = 0;
    double gpod_lambda = -1.0;
    int gpod_r_max = 12;
    gpod_cmd->add_option("--data", gpod_data,
                         "directory with train/ validation/ test FRC1 subdirectories")
        ->required();
    gpod_cmd->add_option("--sensors", gpod_sensors, "sensor layout JSON")->required();
    gpod_cmd->add_option("--r", gpod_r, "components (0 = select on validation)");
    gpod_cmd->add_option("--lambda", gpod_lambda,
                         "divergence weight (<0 = select on validation)");
    gpod_cmd->add_option("--r-max", gpod_r_max, "basis size / selection cap");

    // --- train -----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train an SCVAE model");
    std::string train_data, train_sensors, train_arch = "conv_small",
                train_lambda_mode = "off";
    int train_epochs = 200, train_batch = 32, train_patience = 50, train_L = 1;
    double train_lr = 1e-3;
    train_cmd->add_option("--data", train_data,
                          "directory with train/ validation/ FRC1 subdirectories")
        ->required();
    train_cmd->add_option("--sensors", train_sensors, "sensor layout JSON")->required();
    train_cmd->add_option("--arch", train_arch,
                          "conv_small | mlp | cylinder | ocean | architecture JSON file");
    train_cmd->add_option("--lambda-mode", train_lambda_mode, "off | adaptive");
    train_cmd->add_option("--max-epochs", train_epochs);
    train_cmd->add_option("--batch-size", train_batch);
    train_cmd->add_option("--patience", train_patience);
    train_cmd->add_option("--mc-samples", train_L);
    train_cmd->add_option("--learning-rate", train_lr);

    // --- predict ---------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "reconstruct a field from measurements");
    std::string predict_model, predict_meas;
    int predict_nmc = 0;
    predict_cmd->add_option("--model", predict_model, "frcmodel-1 file")->required();
    predict_cmd->add_option("--measurements", predict_meas, "measurement CSV (i,j,u,v)")
        ->required();
    predict_cmd->add_option("--nmc", predict_nmc,
                            "Monte Carlo samples for the mean (0 = decode at z=0)");

    // --- uq --------------------------------------------------------------
    auto* uq_cmd = app.add_subcommand("uq", "posterior predictive summary");
    std::string uq_model, uq_meas;
    int uq_nmc = 100, uq_samples = 0;
    double uq_p = 0.95;
    uq_cmd->add_option("--model", uq_model, "frcmodel-1 file")->required();
    uq_cmd->add_option("--measurements", uq_meas, "measurement CSV (i,j,u,v)")->required();
    uq_cmd->add_option("--nmc", uq_nmc, "Monte Carlo sample count");
    uq_cmd->add_option("--p", uq_p, "interval probability");
    uq_cmd->add_option("--samples", uq_samples,
                       "also emit this many generated fields as a CSV montage");

    // --- eval ------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "metrics between prediction and truth datasets");
    std::string eval_pred, eval_truth;
    eval_cmd->add_option("--pred", eval_pred, "FRC1 directory of predictions")->required();
    eval_cmd->add_option("--truth", eval_truth, "FRC1 directory of ground truth")->required();

    // --- experiment --------------------------------------------------------
    auto* exp_cmd = app.add_subcommand("experiment", "run a method-comparison experiment");
    std::string exp_plan, exp_preset = "default";
    exp_cmd->add_option("--plan", exp_plan, "experiment plan JSON file");
    exp_cmd->add_option("--preset", exp_preset, "default | tiny | divreg");

    // --- verify ------------------------------------------------------------
    auto* verify_cmd = app.add_subcommand("verify", "recompute metrics of a finished experiment");
    std::string verify_run_dir;
    verify_cmd->add_option("--run", verify_run_dir, "experiment output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    if (gen->parsed()) {
        FlowRecipe recipe;
        recipe.kind = flow_kind_from_string(gen_recipe);
        recipe.amplitude = gen_amp;
        recipe.wavenumber_x = gen_kx;
        recipe.wavenumber_y = gen_ky;
        recipe.phase_speed = gen_speed;
        recipe.seed = g.seed;
        const double dx = gen_dx > 0.0 ? gen_dx : 6.283185307179586 / gen_nx;
        const double dy = gen_dy > 0.0 ? gen_dy : 6.283185307179586 / gen_ny;
        const Grid grid(gen_nx, gen_ny, dx, dy);
        std::vector<double> times(static_cast<std::size_t>(gen_steps));
        for (std::size_t i = 0; i < times.size(); ++i) times[i] = gen_t0 + gen_dt * i;
        if (g.out.empty()) throw std::invalid_argument("gen: --out directory required");
        write_frc1(g.out, generate(recipe, grid, times));
        std::cout << "wrote " << gen_steps << " snapshots to " << g.out << "\n";
        return 0;
    }

    if (split_cmd->parsed()) {
        SplitSpec spec;
        spec.mode = split_mode == "random" ? SplitMode::random : SplitMode::sequential;
        spec.test_fraction = split_test;
        spec.validation_fraction = split_val;
        spec.seed = g.seed;
        const FlowSeries series = read_frc1(split_data);
        const SplitResult r = split(series, spec);
        const fs::path out = g.out.empty() ? fs::path(split_data) : fs::path(g.out);
        write_frc1(out / "train", r.train);
        write_frc1(out / "validation", r.validation);
        write_frc1(out / "test", r.test);
        json m = {{"mode", split_mode},
                  {"test_fraction", split_test},
                  {"validation_fraction", split_val},
                  {"seed", g.seed},
                  {"sizes", {{"train", r.train.size()},
                             {"validation", r.validation.size()},
                             {"test", r.test.size()}}}};
        std::ofstream mf(out / "split.json");
        mf << m.dump(2) << "\n";
        std::cout << "train=" << r.train.size() << " validation=" << r.validation.size()
                  << " test=" << r.test.size() << "\n";
        return 0;
    }

    if (pod_cmd->parsed()) {
        const FlowSeries train = read_frc1(pod_data);
        const ScalingParams scaling =
            pod_no_scaling ? ScalingParams::identity() : compute_scaling(train);
        const PodBasis basis = compute_pod(train, pod_r, scaling);
        const fs::path out = g.out.empty() ? fs::path(pod_data) / "basis.frcbasis"
                                           : fs::path(g.out);
        save_pod_basis(out, basis);
        std::cout << "wrote r=" << basis.r << " basis to " << out << "\n";
        return 0;
    }

    if (gpod_cmd->parsed()) {
        const fs::path root(gpod_data);
        const FlowSeries train = read_frc1(root / "train");
        const FlowSeries validation = read_frc1(root / "validation");
        const FlowSeries test = read_frc1(root / "test");
        const SensorLayout layout = read_sensor_layout(gpod_sensors);
        const SamplingOperator op(layout, train.grid);
        const DivergenceOperator div(train.grid);
        const ScalingParams scaling = compute_scaling(train);
        const int r_max = std::min({gpod_r_max, train.grid.n_state(),
                                    static_cast<int>(train.size())});
        const PodBasis basis = compute_pod(train, r_max, scaling);

        GpodConfig cfg;
        if (gpod_r > 0 && gpod_lambda >= 0.0) {
            cfg.r = gpod_r;
            cfg.lambda = gpod_lambda;
        } else {
            std::vector<int> r_grid;
            const int cap = gpod_lambda > 0.0 ? basis.r
                                              : std::min(basis.r, op.n_measurements());
            for (int r = 1; r <= cap; ++r) r_grid.push_back(r);
            std::vector<double> lambda_grid = gpod_lambda >= 0.0
                                                  ? std::vector<double>{gpod_lambda}
                                                  : std::vector<double>{0.0, 1e-4, 1e-2, 1.0, 1e2};
            cfg = select_gpod_hyperparams(basis, validation, op, div, r_grid, lambda_grid);
            std::cout << "selected r=" << cfg.r << " lambda=" << cfg.lambda
                      << " on validation\n";
        }

        const fs::path out = g.out.empty() ? root / "gpod_errors.csv" : fs::path(g.out);
        std::ofstream f(out);
        f << "snapshot,relative_error,divergence_error\n";
        double mean_rel = 0.0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            const auto truth = flatten_state(test.snapshots[i]);
            const auto pred =
                gpod_reconstruct(basis, op, div, op.apply(truth), cfg).unscaled(basis);
            const double rel = relative_error({pred}, {truth});
            const double dive = divergence_error({pred}, div);
            mean_rel += rel;
            f << i << "," << format_double(rel) << "," << format_double(dive) << "\n";
        }
        std::cout << "mean relative error " << mean_rel / static_cast<double>(test.size())
                  << " over " << test.size() << " snapshots -> " << out << "\n";
        return 0;
    }

    if (train_cmd->parsed()) {
        const fs::path root(train_data);
        const FlowSeries train = read_frc1(root / "train");
        const FlowSeries validation = read_frc1(root / "validation");
        const SensorLayout layout = read_sensor_layout(train_sensors);

        ScvaeArchitecture arch;
        if (train_arch == "conv_small" || train_arch == "mlp" || train_arch == "cylinder" ||
            train_arch == "ocean") {
            const int n_meas = 2 * layout.size();
            if (train_arch == "conv_small") arch = ScvaeArchitecture::conv_small(train.grid, n_meas);
            else if (train_arch == "mlp") arch = ScvaeArchitecture::mlp(train.grid, n_meas);
            else if (train_arch == "cylinder") arch = ScvaeArchitecture::cylinder(train.grid, n_meas);
            else arch = ScvaeArchitecture::ocean(train.grid, n_meas);
        } else {
            std::ifstream af(train_arch);
            if (!af) throw std::invalid_argument("train: cannot open arch file " + train_arch);
            arch = ScvaeArchitecture::from_json(json::parse(af));
        }

        TrainConfig cfg;
        cfg.batch_size = train_batch;
        cfg.max_epochs = train_epochs;
        cfg.patience = train_patience;
        cfg.mc_samples = train_L;
        cfg.lambda_mode = train_lambda_mode == "adaptive" ? LambdaMode::adaptive
                                                          : LambdaMode::off;
        cfg.seed = g.seed;
        cfg.optimizer.learning_rate = train_lr;

        const TrainResult result = train_scvae(train, validation, layout, arch, cfg);
        const fs::path out = g.out.empty() ? root / "model.frcmodel" : fs::path(g.out);
        save_scvae_model(out, *result.model);
        write_training_log_csv(out.string() + ".log.csv", result.log);
        std::cout << "trained " << result.epochs_trained << " epochs (best epoch "
                  << result.best_epoch << ", validation objective "
                  << result.best_val_objective << ") -> " << out << "\n";
        return 0;
    }

    if (predict_cmd->parsed()) {
        auto model = std::shared_ptr<ScvaeModel>(load_scvae_model(predict_model));
        const auto [layout, m_raw] = read_measurements_csv(predict_meas);
        if (layout.locations != model->layout().locations) {
            throw std::invalid_argument("predict: measurement layout does not match the model");
        }
        PredictiveDistribution dist = predict(model, m_raw);
        std::vector<double> state;
        if (predict_nmc == 0) {
            state = dist.draw(std::vector<double>(static_cast<std::size_t>(model->latent_dim()),
                                                  0.0));
        } else {
            Rng rng(derive_seed(g.seed, "predict"));
            std::vector<double> acc(static_cast<std::size_t>(model->grid().n_state()), 0.0);
            std::vector<double> eps(static_cast<std::size_t>(model->latent_dim()));
            for (int s = 0; s < predict_nmc; ++s) {
                for (double& e : eps) e = rng.normal();
                const auto x = dist.draw(eps);
                for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += x[k];
            }
            for (double& v : acc) v /= static_cast<double>(predict_nmc);
            state = std::move(acc);
        }
        if (g.out.empty()) throw std::invalid_argument("predict: --out directory required");
        write_frc1(g.out, FlowSeries(model->grid(),
                                     {unflatten_state(model->grid(), state, 0)}));
        std::cout << "wrote prediction to " << g.out << "\n";
        return 0;
    }

    if (uq_cmd->parsed()) {
        auto model = std::shared_ptr<ScvaeModel>(load_scvae_model(uq_model));
        const auto [layout, m_raw] = read_measurements_csv(uq_meas);
        if (layout.locations != model->layout().locations) {
            throw std::invalid_argument("uq: measurement layout does not match the model");
        }
        PredictiveDistribution dist = predict(model, m_raw);
        const PosteriorSummary summary = summarize(dist, uq_nmc, g.seed);
        const fs::path out = g.out.empty() ? fs::path("uq_out") : fs::path(g.out);
        fs::create_directories(out);
        write_frc1(out / "mean", FlowSeries(model->grid(),
                                            {unflatten_state(model->grid(), summary.mean, 0)}));
        std::ofstream f(out / "intervals.csv");
        f << "coordinate,mean,std,low,high\n";
        for (std::size_t n = 0; n < summary.mean.size(); ++n) {
            const auto [lo, hi] = interval(summary, static_cast<int>(n), uq_p);
            double var = 0.0;
            for (int c = 0; c < summary.n_factors; ++c) {
                const double u = summary.factor_at(static_cast<int>(n), c);
                var += u * u * summary.spectrum[static_cast<std::size_t>(c)];
            }
            f << n << "," << format_double(summary.mean[n]) << ","
              << format_double(std::sqrt(var)) << "," << format_double(lo) << ","
              << format_double(hi) << "\n";
        }
        if (uq_samples > 0) {
            const auto fields = sample_fields(dist, model->grid(), uq_samples, g.seed);
            write_montage_csv(out, fields);
            std::ofstream sf(out / "samples.csv");
            sf << "sample,point,u,v\n";
            for (std::size_t s = 0; s < fields.size(); ++s) {
                for (std::size_t k = 0; k < fields[s].u.size(); ++k) {
                    sf << s << "," << k << "," << format_double(fields[s].u[k]) << ","
                       << format_double(fields[s].v[k]) << "\n";
                }
            }
            // measurement-fit statistic of the samples (logged, no hard bound)
            const SamplingOperator op(model->layout(), model->grid());
            double fit = 0.0;
            for (const auto& snap : fields) {
                const auto ms = op.apply(flatten_state(snap));
                double diff = 0.0, norm = 0.0;
                for (std::size_t k = 0; k < ms.size(); ++k) {
                    diff += (ms[k] - m_raw[k]) * (ms[k] - m_raw[k]);
                    norm += m_raw[k] * m_raw[k];
                }
                fit += norm > 0.0 ? std::sqrt(diff / norm) : std::sqrt(diff);
            }
            std::cout << "sample measurement misfit (mean relative): "
                      << fit / static_cast<double>(fields.size()) << "\n";
        }
        std::cout << "wrote UQ summary (N_MC=" << uq_nmc << ", p=" << uq_p << ") to " << out
                  << "\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        const FlowSeries pred = read_frc1(eval_pred);
        const FlowSeries truth = read_frc1(eval_truth);
        std::vector<std::vector<double>> preds, truths;
        for (const auto& s : pred.snapshots) preds.push_back(flatten_state(s));
        for (const auto& s : truth.snapshots) truths.push_back(flatten_state(s));
        const DivergenceOperator div(pred.grid);
        std::cout << "relative_error " << format_double(relative_error(preds, truths)) << "\n"
                  << "divergence_error " << format_double(divergence_error(preds, div)) << "\n";
        return 0;
    }

    if (exp_cmd->parsed()) {
        ExperimentPlan plan;
        if (!exp_plan.empty()) {
            std::ifstream pf(exp_plan);
            if (!pf) throw std::invalid_argument("experiment: cannot open plan " + exp_plan);
            plan = ExperimentPlan::from_json(json::parse(pf));
        } else {
            plan = ExperimentPlan::preset(exp_preset);
        }
        if (g.seed != 0) plan.seed = g.seed;
        if (g.threads > 1) plan.threads = g.threads;
        const fs::path out = g.out.empty() ? fs::path("experiment_out") : fs::path(g.out);
        const ExperimentResult result = run_experiment(plan, out);
        std::cout << "wrote " << result.rows.size() << " rows to " << out / "results.csv";
        if (!result.errors.empty()) std::cout << " (" << result.errors.size() << " cells failed)";
        std::cout << "\n";
        return result.errors.empty() ? 0 : 3;
    }

    if (verify_cmd->parsed()) {
        verify_run(verify_run_dir);
        std::cout << "verified: all manifest rows recompute to within 1e-10\n";
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
}
