#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowrecon/pod.hpp"
#include "flowrecon/scvae.hpp"
#include "flowrecon/split.hpp"
#include "flowrecon/synthetic.hpp"

namespace flowrecon {

enum class Method { scvae_l0, scvae_lpos, gpod_l0, gpod_lpos };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct DatasetSpec {
    bool from_recipe = true;
    FlowRecipe recipe;
    int nx = 64, ny = 32;
    double dx = 0.0, dy = 0.0; // 0 => 2*pi / n
    int steps = 2000;
    double dt = 0.0130899693899574718; // 2*pi / 480
    double t0 = 0.0;
    std::string path; // FRC1 directory when !from_recipe
};

struct LayoutPlan {
    int count = 1;              // independent nested layout draws
    std::vector<int> m_values;  // sensor counts, subsets of the same draw
    int m_max = 5;              // points sampled per draw
    std::uint64_t seed = 1;
};

struct ExperimentPlan {
    DatasetSpec dataset;
    SplitSpec split;
    LayoutPlan layouts;
    std::vector<Method> methods;
    int repeats = 3;
    std::uint64_t seed = 0;
    TrainConfig train;
    std::string arch = "conv_small"; // conv_small | mlp | cylinder | ocean
    int eval_nmc = 16; // MC samples behind the SCVAE mean prediction; 0 = z=0 decode
    int gpod_r_max = 12;
    std::vector<double> gpod_lambda_grid = {1e-4, 1e-2, 1.0, 1e2};
    int threads = 1;

    nlohmann::json to_json() const;
    static ExperimentPlan from_json(const nlohmann::json& j);
    void validate() const;

    /// Named presets: "default" (the desk-scale trend experiment), "tiny"
    /// (seconds; determinism and smoke checks), "divreg" (the lambda>0 vs
    /// lambda=0 spread comparison).
    static ExperimentPlan preset(const std::string& name);
};

struct MetricsRow {
    std::string method;      // scvae | gpod
    std::string lambda_mode; // l0 | lpos
    int layout_index = 0;
    int m = 0;
    int repeat = 0;
    bool selected = false; // best-on-validation pick within its cell
    double relative_error = 0.0;
    double divergence_error = 0.0;
    int epochs_trained = 0;
};

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    std::vector<std::string> errors; // per-cell failures, run continued
    std::filesystem::path out_dir;
};

/// Runs every (layout, M, method) cell, persists predictions/models/manifest
/// under out_dir, and writes results.csv plus a long-format boxplot file.
/// Byte-identical outputs under identical seeds.
ExperimentResult run_experiment(const ExperimentPlan& plan,
                                const std::filesystem::path& out_dir);

/// Recomputes both metrics of every manifest row from the persisted
/// prediction and truth containers and compares against results.csv to an
/// absolute 1e-10. Throws on any mismatch.
void verify_run(const std::filesystem::path& out_dir);

} // namespace flowrecon
