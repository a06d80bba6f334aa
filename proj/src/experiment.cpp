#include "flowrecon/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "flowrecon/frc_io.hpp"
#include "flowrecon/metrics.hpp"
#include "flowrecon/rng.hpp"
#include "flowrecon/uq.hpp"

namespace flowrecon {

using nlohmann::json;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr const char* kVersion = "0.1.0";
} // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::scvae_l0: return "scvae_l0";
        case Method::scvae_lpos: return "scvae_lpos";
        case Method::gpod_l0: return "gpod_l0";
        case Method::gpod_lpos: return "gpod_lpos";
    }
    throw std::invalid_argument("unknown method");
}

Method method_from_string(const std::string& s) {
    if (s == "scvae_l0") return Method::scvae_l0;
    if (s == "scvae_lpos") return Method::scvae_lpos;
    if (s == "gpod_l0") return Method::gpod_l0;
    if (s == "gpod_lpos") return Method::gpod_lpos;
    throw std::invalid_argument("unknown method: " + s);
}

json ExperimentPlan::to_json() const {
    json j;
    j["dataset"] = {{"from_recipe", dataset.from_recipe},
                    {"kind", flowrecon::to_string(dataset.recipe.kind)},
                    {"amplitude", dataset.recipe.amplitude},
                    {"wavenumber_x", dataset.recipe.wavenumber_x},
                    {"wavenumber_y", dataset.recipe.wavenumber_y},
                    {"phase_speed", dataset.recipe.phase_speed},
                    {"recipe_seed", dataset.recipe.seed},
                    {"nx", dataset.nx},
                    {"ny", dataset.ny},
                    {"dx", dataset.dx},
                    {"dy", dataset.dy},
                    {"steps", dataset.steps},
                    {"dt", dataset.dt},
                    {"t0", dataset.t0},
                    {"path", dataset.path}};
    j["split"] = {{"mode", split.mode == SplitMode::sequential ? "sequential" : "random"},
                  {"test_fraction", split.test_fraction},
                  {"validation_fraction", split.validation_fraction},
                  {"seed", split.seed}};
    j["layouts"] = {{"count", layouts.count},
                    {"m_values", layouts.m_values},
                    {"m_max", layouts.m_max},
                    {"seed", layouts.seed}};
    j["methods"] = json::array();
    for (const Method m : methods) j["methods"].push_back(flowrecon::to_string(m));
    j["repeats"] = repeats;
    j["seed"] = seed;
    j["train"] = {{"batch_size", train.batch_size},
                  {"max_epochs", train.max_epochs},
                  {"patience", train.patience},
                  {"mc_samples", train.mc_samples},
                  {"learning_rate", train.optimizer.learning_rate},
                  {"beta_mode", train.beta_mode == BetaMode::fixed ? "fixed" : "adaptive"},
                  {"beta_fixed", train.beta_fixed}};
    j["arch"] = arch;
    j["eval_nmc"] = eval_nmc;
    j["gpod_r_max"] = gpod_r_max;
    j["gpod_lambda_grid"] = gpod_lambda_grid;
    j["threads"] = threads;
    return j;
}

ExperimentPlan ExperimentPlan::from_json(const json& j) {
    ExperimentPlan p;
    const auto& d = j.at("dataset");
    p.dataset.from_recipe = d.value("from_recipe", true);
    p.dataset.recipe.kind = flow_kind_from_string(d.value("kind", "traveling_vortices"));
    p.dataset.recipe.amplitude = d.value("amplitude", 1.0);
    p.dataset.recipe.wavenumber_x = d.value("wavenumber_x", 1);
    p.dataset.recipe.wavenumber_y = d.value("wavenumber_y", 1);
    p.dataset.recipe.phase_speed = d.value("phase_speed", 1.0);
    p.dataset.recipe.seed = d.value("recipe_seed", 0ULL);
    p.dataset.nx = d.value("nx", 64);
    p.dataset.ny = d.value("ny", 32);
    p.dataset.dx = d.value("dx", 0.0);
    p.dataset.dy = d.value("dy", 0.0);
    p.dataset.steps = d.value("steps", 2000);
    p.dataset.dt = d.value("dt", kTwoPi / 480.0);
    p.dataset.t0 = d.value("t0", 0.0);
    p.dataset.path = d.value("path", "");
    const auto& s = j.at("split");
    p.split.mode = s.value("mode", "sequential") == "random" ? SplitMode::random
                                                             : SplitMode::sequential;
    p.split.test_fraction = s.value("test_fraction", 0.15);
    p.split.validation_fraction = s.value("validation_fraction", 0.30);
    p.split.seed = s.value("seed", 0ULL);
    const auto& l = j.at("layouts");
    p.layouts.count = l.value("count", 1);
    p.layouts.m_values = l.value("m_values", std::vector<int>{2, 3, 5});
    p.layouts.m_max = l.value("m_max", 5);
    p.layouts.seed = l.value("seed", 1ULL);
    p.methods.clear();
    for (const auto& m : j.at("methods")) p.methods.push_back(method_from_string(m));
    p.repeats = j.value("repeats", 3);
    p.seed = j.value("seed", 0ULL);
    const auto& t = j.at("train");
    p.train.batch_size = t.value("batch_size", 32);
    p.train.max_epochs = t.value("max_epochs", 200);
    p.train.patience = t.value("patience", 50);
    p.train.mc_samples = t.value("mc_samples", 1);
    p.train.optimizer.learning_rate = t.value("learning_rate", 1e-3);
    p.train.beta_mode = t.value("beta_mode", "adaptive") == "fixed" ? BetaMode::fixed
                                                                    : BetaMode::adaptive;
    p.train.beta_fixed = t.value("beta_fixed", 1.0);
    p.arch = j.value("arch", "conv_small");
    p.eval_nmc = j.value("eval_nmc", 16);
    p.gpod_r_max = j.value("gpod_r_max", 12);
    p.gpod_lambda_grid = j.value("gpod_lambda_grid", std::vector<double>{1e-4, 1e-2, 1.0, 1e2});
    p.threads = j.value("threads", 1);
    p.validate();
    return p;
}

void ExperimentPlan::validate() const {
    if (repeats < 1) throw std::invalid_argument("ExperimentPlan: repeats must be >= 1");
    if (layouts.count < 1 || layouts.m_values.empty()) {
        throw std::invalid_argument("ExperimentPlan: layouts must be nonempty");
    }
    for (const int m : layouts.m_values) {
        if (m < 1 || m > layouts.m_max) {
            throw std::invalid_argument("ExperimentPlan: m_values must lie in [1, m_max]");
        }
    }
    if (methods.empty()) throw std::invalid_argument("ExperimentPlan: methods must be nonempty");
    if (eval_nmc < 0) throw std::invalid_argument("ExperimentPlan: eval_nmc must be >= 0");
    if (gpod_r_max < 1) throw std::invalid_argument("ExperimentPlan: gpod_r_max must be >= 1");
    train.validate();
}

ExperimentPlan ExperimentPlan::preset(const std::string& name) {
    ExperimentPlan p;
    p.dataset.recipe.kind = FlowKind::traveling_vortices;
    p.dataset.recipe.phase_speed = 1.0;
    p.methods = {Method::scvae_l0, Method::scvae_lpos, Method::gpod_l0, Method::gpod_lpos};
    if (name == "default") {
        p.dataset.nx = 64;
        p.dataset.ny = 32;
        p.dataset.steps = 2000;
        p.layouts.m_values = {2, 3, 5};
        p.layouts.m_max = 5;
        p.repeats = 3;
        p.train.max_epochs = 85;
        p.train.patience = 50;
        p.arch = "conv_small";
        return p;
    }
    if (name == "tiny") {
        p.dataset.nx = 16;
        p.dataset.ny = 12;
        p.dataset.steps = 160;
        p.dataset.dt = kTwoPi / 60.0;
        p.layouts.m_values = {2};
        p.layouts.m_max = 3;
        p.repeats = 1;
        p.methods = {Method::scvae_l0, Method::gpod_l0};
        p.train.max_epochs = 8;
        p.train.patience = 8;
        p.arch = "mlp";
        p.eval_nmc = 4;
        return p;
    }
    if (name == "divreg") {
        p.dataset.nx = 32;
        p.dataset.ny = 16;
        p.dataset.steps = 600;
        p.dataset.dt = kTwoPi / 160.0;
        p.layouts.count = 10;
        p.layouts.m_values = {3};
        p.layouts.m_max = 3;
        p.repeats = 1;
        p.methods = {Method::scvae_l0, Method::scvae_lpos};
        p.train.max_epochs = 60;
        p.train.patience = 50;
        p.arch = "mlp";
        p.eval_nmc = 8;
        return p;
    }
    throw std::invalid_argument("ExperimentPlan::preset: unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------

namespace {

struct Cell {
    int index = 0;
    int layout_index = 0;
    int m = 0;
    Method method = Method::gpod_l0;
};

struct CellOutcome {
    std::vector<MetricsRow> rows;
    std::vector<json> manifest_rows;
    std::vector<json> access_log;
    std::string error;
};

Grid plan_grid(const ExperimentPlan& plan) {
    const double dx = plan.dataset.dx > 0.0 ? plan.dataset.dx : kTwoPi / plan.dataset.nx;
    const double dy = plan.dataset.dy > 0.0 ? plan.dataset.dy : kTwoPi / plan.dataset.ny;
    return Grid(plan.dataset.nx, plan.dataset.ny, dx, dy);
}

FlowSeries plan_dataset(const ExperimentPlan& plan) {
    if (!plan.dataset.from_recipe) return read_frc1(plan.dataset.path);
    const Grid grid = plan_grid(plan);
    std::vector<double> times(static_cast<std::size_t>(plan.dataset.steps));
    for (std::size_t i = 0; i < times.size(); ++i) {
        times[i] = plan.dataset.t0 + plan.dataset.dt * static_cast<double>(i);
    }
    return generate(plan.dataset.recipe, grid, times);
}

/// Nested sensor draws: layout l samples m_max distinct points; the M-point
/// layout is the first M of them, so smaller layouts are subsets of larger
/// ones within the same draw.
std::vector<std::pair<int, int>> sample_layout_points(const Grid& grid, std::uint64_t seed,
                                                      int layout_index, int m_max) {
    Rng rng(derive_seed(seed, "layout", static_cast<std::uint64_t>(layout_index)));
    std::set<std::pair<int, int>> seen;
    std::vector<std::pair<int, int>> pts;
    while (static_cast<int>(pts.size()) < m_max) {
        const int i = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(grid.nx)));
        const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(grid.ny)));
        if (seen.insert({i, j}).second) pts.emplace_back(i, j);
    }
    return pts;
}

ScvaeArchitecture make_architecture(const std::string& name, const Grid& grid, int n_meas) {
    if (name == "conv_small") return ScvaeArchitecture::conv_small(grid, n_meas);
    if (name == "mlp") return ScvaeArchitecture::mlp(grid, n_meas);
    if (name == "cylinder") return ScvaeArchitecture::cylinder(grid, n_meas);
    if (name == "ocean") return ScvaeArchitecture::ocean(grid, n_meas);
    throw std::invalid_argument("unknown architecture preset: " + name);
}

std::string csv_row(const MetricsRow& r) {
    std::ostringstream ss;
    ss << r.method << "," << r.lambda_mode << "," << r.layout_index << "," << r.m << ","
       << r.repeat << "," << (r.selected ? 1 : 0) << "," << format_double(r.relative_error)
       << "," << format_double(r.divergence_error) << "," << r.epochs_trained;
    return ss.str();
}

} // namespace

ExperimentResult run_experiment(const ExperimentPlan& plan,
                                const std::filesystem::path& out_dir) {
    plan.validate();
    std::filesystem::create_directories(out_dir);
    std::filesystem::create_directories(out_dir / "artifacts");
    std::filesystem::create_directories(out_dir / "models");

    const FlowSeries dataset = plan_dataset(plan);
    const Grid grid = dataset.grid;
    const SplitResult splits = split(dataset, plan.split);
    const DivergenceOperator div(grid);
    const ScalingParams scaling = compute_scaling(splits.train);

    write_frc1(out_dir / "truth" / "test", splits.test);

    std::vector<std::vector<double>> test_truth;
    test_truth.reserve(splits.test.size());
    for (const auto& s : splits.test.snapshots) test_truth.push_back(flatten_state(s));

    // Shared POD basis (computed on scaled training data) for all GPOD cells.
    const bool any_gpod = std::any_of(plan.methods.begin(), plan.methods.end(), [](Method m) {
        return m == Method::gpod_l0 || m == Method::gpod_lpos;
    });
    PodBasis basis;
    if (any_gpod) {
        const int r_max = std::min({plan.gpod_r_max, grid.n_state(),
                                    static_cast<int>(splits.train.size())});
        basis = compute_pod(splits.train, r_max, scaling);
    }

    // Layout draws.
    std::vector<std::vector<std::pair<int, int>>> layout_points;
    for (int l = 0; l < plan.layouts.count; ++l) {
        layout_points.push_back(sample_layout_points(grid, plan.layouts.seed, l,
                                                     plan.layouts.m_max));
    }

    // Cell list in deterministic plan order.
    std::vector<Cell> cells;
    for (int l = 0; l < plan.layouts.count; ++l) {
        for (const int m : plan.layouts.m_values) {
            for (const Method method : plan.methods) {
                cells.push_back(Cell{static_cast<int>(cells.size()), l, m, method});
            }
        }
    }

    std::vector<CellOutcome> outcomes(cells.size());

    auto run_cell = [&](const Cell& cell) {
        CellOutcome& out = outcomes[static_cast<std::size_t>(cell.index)];
        try {
            const auto& pts = layout_points[static_cast<std::size_t>(cell.layout_index)];
            SensorLayout layout(std::vector<std::pair<int, int>>(pts.begin(),
                                                                 pts.begin() + cell.m));
            const SamplingOperator op(layout, grid);
            const bool lpos = cell.method == Method::scvae_lpos ||
                              cell.method == Method::gpod_lpos;
            const std::string lambda_tag = lpos ? "lpos" : "l0";

            std::vector<std::vector<double>> test_meas;
            test_meas.reserve(test_truth.size());
            for (const auto& x : test_truth) test_meas.push_back(op.apply(x));

            auto persist_predictions = [&](const std::vector<std::vector<double>>& preds,
                                           const std::string& tag) {
                std::vector<FlowSnapshot> snaps;
                snaps.reserve(preds.size());
                for (std::size_t i = 0; i < preds.size(); ++i) {
                    snaps.push_back(unflatten_state(grid, preds[i], static_cast<int>(i)));
                }
                const auto dir = out_dir / "artifacts" /
                                 ("cell" + std::to_string(cell.index) + "_" + tag);
                write_frc1(dir, FlowSeries(grid, std::move(snaps)));
                return std::filesystem::relative(dir, out_dir).string();
            };

            if (cell.method == Method::gpod_l0 || cell.method == Method::gpod_lpos) {
                // Hyperparameter selection reads the validation split only.
                std::vector<int> r_grid;
                const int r_cap = lpos ? basis.r : std::min(basis.r, op.n_measurements());
                for (int r = 1; r <= r_cap; ++r) r_grid.push_back(r);
                const std::vector<double> lambda_grid =
                    lpos ? plan.gpod_lambda_grid : std::vector<double>{0.0};
                const GpodConfig cfg = select_gpod_hyperparams(basis, splits.validation, op, div,
                                                               r_grid, lambda_grid);
                out.access_log.push_back({{"cell", cell.index},
                                          {"event", "gpod_hyperparameter_selection"},
                                          {"reads", json::array({"validation"})}});

                std::vector<std::vector<double>> preds;
                preds.reserve(test_truth.size());
                for (const auto& m : test_meas) {
                    preds.push_back(gpod_reconstruct(basis, op, div, m, cfg).unscaled(basis));
                }
                out.access_log.push_back({{"cell", cell.index},
                                          {"event", "test_evaluation"},
                                          {"reads", json::array({"test"})}});
                MetricsRow row;
                row.method = "gpod";
                row.lambda_mode = lambda_tag;
                row.layout_index = cell.layout_index;
                row.m = cell.m;
                row.repeat = 0;
                row.selected = true;
                row.relative_error = relative_error(preds, test_truth);
                row.divergence_error = divergence_error(preds, div);
                row.epochs_trained = 0;
                const std::string pred_dir = persist_predictions(preds, "gpod_" + lambda_tag);
                out.rows.push_back(row);
                out.manifest_rows.push_back({{"row", csv_row(row)},
                                             {"prediction", pred_dir},
                                             {"truth", "truth/test"},
                                             {"gpod_r", cfg.r},
                                             {"gpod_lambda", cfg.lambda}});
                return;
            }

            // SCVAE cell: repeats, then best-on-validation selection.
            TrainConfig cfg = plan.train;
            cfg.lambda_mode = lpos ? LambdaMode::adaptive : LambdaMode::off;
            const ScvaeArchitecture arch = make_architecture(plan.arch, grid,
                                                             op.n_measurements());

            struct RepeatOutcome {
                MetricsRow row;
                std::string pred_dir;
                double val_objective = 0.0;
            };
            std::vector<RepeatOutcome> repeats;
            for (int rep = 0; rep < plan.repeats; ++rep) {
                cfg.seed = derive_seed(plan.seed, "scvae-train",
                                       static_cast<std::uint64_t>(cell.index),
                                       static_cast<std::uint64_t>(rep));
                TrainResult tr = train_scvae(splits.train, splits.validation, layout, arch, cfg);

                Rng eval_rng(derive_seed(plan.seed, "eval-eps",
                                         static_cast<std::uint64_t>(cell.index),
                                         static_cast<std::uint64_t>(rep)));
                std::vector<std::vector<double>> preds;
                preds.reserve(test_truth.size());
                for (const auto& m_raw : test_meas) {
                    const auto m_scaled = scale_measurements(tr.model->scaling(), m_raw);
                    if (plan.eval_nmc == 0) {
                        preds.push_back(unscale_state(tr.model->scaling(),
                                                      tr.model->predict_state_scaled(m_scaled)));
                    } else {
                        // mean prediction over eval_nmc latent draws
                        std::vector<double> acc(static_cast<std::size_t>(grid.n_state()), 0.0);
                        std::vector<double> eps(static_cast<std::size_t>(arch.latent_dim));
                        for (int s = 0; s < plan.eval_nmc; ++s) {
                            for (double& e : eps) e = eval_rng.normal();
                            const auto x = tr.model->decode(eps, m_scaled);
                            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += x[k];
                        }
                        for (double& v : acc) v /= static_cast<double>(plan.eval_nmc);
                        preds.push_back(unscale_state(tr.model->scaling(), acc));
                    }
                }

                RepeatOutcome ro;
                ro.row.method = "scvae";
                ro.row.lambda_mode = lambda_tag;
                ro.row.layout_index = cell.layout_index;
                ro.row.m = cell.m;
                ro.row.repeat = rep;
                ro.row.selected = false;
                ro.row.relative_error = relative_error(preds, test_truth);
                ro.row.divergence_error = divergence_error(preds, div);
                ro.row.epochs_trained = tr.epochs_trained;
                ro.val_objective = tr.best_val_objective;
                ro.pred_dir = persist_predictions(
                    preds, "scvae_" + lambda_tag + "_rep" + std::to_string(rep));
                save_scvae_model(out_dir / "models" /
                                     ("cell" + std::to_string(cell.index) + "_rep" +
                                      std::to_string(rep) + ".frcmodel"),
                                 *tr.model);
                write_training_log_csv(out_dir / "models" /
                                           ("cell" + std::to_string(cell.index) + "_rep" +
                                            std::to_string(rep) + "_log.csv"),
                                       tr.log);
                repeats.push_back(std::move(ro));
            }

            int best = 0;
            for (int rep = 1; rep < static_cast<int>(repeats.size()); ++rep) {
                if (repeats[static_cast<std::size_t>(rep)].val_objective <
                    repeats[static_cast<std::size_t>(best)].val_objective) {
                    best = rep;
                }
            }
            repeats[static_cast<std::size_t>(best)].row.selected = true;
            out.access_log.push_back({{"cell", cell.index},
                                      {"event", "scvae_repeat_selection"},
                                      {"reads", json::array({"validation"})}});
            out.access_log.push_back({{"cell", cell.index},
                                      {"event", "test_evaluation"},
                                      {"reads", json::array({"test"})}});
            for (const auto& ro : repeats) {
                out.rows.push_back(ro.row);
                out.manifest_rows.push_back({{"row", csv_row(ro.row)},
                                             {"prediction", ro.pred_dir},
                                             {"truth", "truth/test"},
                                             {"val_objective", ro.val_objective}});
            }
        } catch (const std::exception& e) {
            out.error = "cell " + std::to_string(cell.index) + " (" +
                        flowrecon::to_string(cell.method) + ", layout " +
                        std::to_string(cell.layout_index) + ", M=" + std::to_string(cell.m) +
                        "): " + e.what();
        }
    };

    const int n_workers = std::max(1, std::min<int>(plan.threads,
                                                    static_cast<int>(cells.size())));
    if (n_workers == 1) {
        for (const Cell& cell : cells) run_cell(cell);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cells.size()) break;
                    run_cell(cells[i]);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    // Collect in plan order.
    ExperimentResult result;
    result.out_dir = out_dir;
    json manifest_rows = json::array();
    json access_log = json::array();
    for (const auto& outcome : outcomes) {
        if (!outcome.error.empty()) {
            result.errors.push_back(outcome.error);
            continue;
        }
        for (const auto& r : outcome.rows) result.rows.push_back(r);
        for (const auto& r : outcome.manifest_rows) manifest_rows.push_back(r);
        for (const auto& r : outcome.access_log) access_log.push_back(r);
    }

    std::ofstream csv(out_dir / "results.csv");
    csv << "method,lambda_mode,layout,M,repeat,selected,relative_error,divergence_error,"
           "epochs_trained\n";
    for (const auto& r : result.rows) csv << csv_row(r) << "\n";
    if (!csv) throw std::runtime_error("run_experiment: cannot write results.csv");

    std::ofstream longf(out_dir / "long.csv");
    longf << "metric,method,lambda_mode,layout,M,repeat,selected,value\n";
    for (const auto& r : result.rows) {
        longf << "relative_error," << r.method << "," << r.lambda_mode << "," << r.layout_index
              << "," << r.m << "," << r.repeat << "," << (r.selected ? 1 : 0) << ","
              << format_double(r.relative_error) << "\n";
        longf << "divergence_error," << r.method << "," << r.lambda_mode << "," << r.layout_index
              << "," << r.m << "," << r.repeat << "," << (r.selected ? 1 : 0) << ","
              << format_double(r.divergence_error) << "\n";
    }
    if (!longf) throw std::runtime_error("run_experiment: cannot write long.csv");

    json manifest;
    manifest["version"] = kVersion;
    manifest["formats"] = {"FRC1", "frcmodel-1", "frcbasis-1"};
    manifest["plan"] = plan.to_json();
    manifest["rows"] = manifest_rows;
    manifest["access_log"] = access_log;
    manifest["errors"] = result.errors;
    json layout_json = json::array();
    for (const auto& pts : layout_points) {
        json lp = json::array();
        for (const auto& [i, j] : pts) lp.push_back({i, j});
        layout_json.push_back(lp);
    }
    manifest["layout_points"] = layout_json;
    std::ofstream mf(out_dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
    if (!mf) throw std::runtime_error("run_experiment: cannot write manifest.json");

    return result;
}

void verify_run(const std::filesystem::path& out_dir) {
    std::ifstream mf(out_dir / "manifest.json");
    if (!mf) throw std::invalid_argument("verify_run: missing manifest.json in " +
                                         out_dir.string());
    const json manifest = json::parse(mf);

    // Index results.csv rows by their full prefix.
    std::ifstream csv(out_dir / "results.csv");
    if (!csv) throw std::invalid_argument("verify_run: missing results.csv");
    std::string line;
    std::getline(csv, line); // header
    std::vector<std::string> csv_rows;
    while (std::getline(csv, line)) {
        if (!line.empty()) csv_rows.push_back(line);
    }

    std::size_t checked = 0;
    for (const auto& row : manifest.at("rows")) {
        const std::string expect = row.at("row").get<std::string>();
        if (std::find(csv_rows.begin(), csv_rows.end(), expect) == csv_rows.end()) {
            throw std::runtime_error("verify_run: manifest row missing from results.csv: " +
                                     expect);
        }
        // Recompute both metrics from the persisted artifacts.
        const FlowSeries pred = read_frc1(out_dir / row.at("prediction").get<std::string>());
        const FlowSeries truth = read_frc1(out_dir / row.at("truth").get<std::string>());
        std::vector<std::vector<double>> preds, truths;
        for (const auto& s : pred.snapshots) preds.push_back(flatten_state(s));
        for (const auto& s : truth.snapshots) truths.push_back(flatten_state(s));
        const DivergenceOperator div(pred.grid);
        const double rel = relative_error(preds, truths);
        const double dive = divergence_error(preds, div);

        // Columns 6 and 7 of the row string hold the stored metrics.
        std::istringstream ss(expect);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        const double stored_rel = std::stod(cols.at(6));
        const double stored_div = std::stod(cols.at(7));
        if (std::abs(stored_rel - rel) > 1e-10 || std::abs(stored_div - dive) > 1e-10) {
            throw std::runtime_error("verify_run: metric mismatch for row: " + expect);
        }
        ++checked;
    }
    if (checked == 0) throw std::runtime_error("verify_run: no rows verified");
}

} // namespace flowrecon
