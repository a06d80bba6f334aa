#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "flowrecon/experiment.hpp"
#include "flowrecon/frc_io.hpp"
#include "flowrecon/metrics.hpp"
#include "flowrecon/rng.hpp"
#include "flowrecon/synthetic.hpp"

using namespace flowrecon;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

} // namespace

TEST_CASE("relative_error: identity, arithmetic example, recomputation oracle") {
    const std::vector<std::vector<double>> truths{{3, 4, 0, 0}, {1, 1, 1, 1}};
    CHECK(relative_error(truths, truths) == 0.0);

    CHECK(relative_error({{0, 4, 0, 0}}, {{3, 4, 0, 0}}) == doctest::Approx(0.6));

    Rng rng(3);
    std::vector<std::vector<double>> preds, ts;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> t(10), p(10);
        for (double& v : t) v = rng.uniform(-2.0, 2.0);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = t[k] + rng.uniform(-0.1, 0.1);
        ts.push_back(t);
        preds.push_back(p);
    }
    double manual = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < ts[i].size(); ++k) {
            num += (preds[i][k] - ts[i][k]) * (preds[i][k] - ts[i][k]);
            den += ts[i][k] * ts[i][k];
        }
        manual += std::sqrt(num) / std::sqrt(den);
    }
    manual /= static_cast<double>(ts.size());
    CHECK(relative_error(preds, ts) == doctest::Approx(manual).epsilon(1e-14));

    CHECK_THROWS_AS(relative_error({{1.0}}, {{0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(relative_error({}, {}), std::invalid_argument);
}

TEST_CASE("divergence_error: exactness, constant-divergence arithmetic, refinement") {
    const Grid g(10, 8, 0.31, 0.17);
    const DivergenceOperator div(g);

    // affine divergence-free field u = y, v = x
    std::vector<double> x(static_cast<std::size_t>(g.n_state()));
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            x[static_cast<std::size_t>(g.index(i, j))] = g.y(j);
            x[static_cast<std::size_t>(g.n_points() + g.index(i, j))] = g.x(i);
        }
    CHECK(divergence_error({x}, div) <= 1e-12);

    // u = x, v = 0: divergence 1 everywhere, norm sqrt(N)
    std::vector<double> lin(static_cast<std::size_t>(g.n_state()), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) lin[static_cast<std::size_t>(g.index(i, j))] = g.x(i);
    CHECK(divergence_error({lin}, div) ==
          doctest::Approx(std::sqrt(static_cast<double>(g.n_points()))).epsilon(1e-12));

    // refinement on Taylor-Green fields (the symmetric truncation terms of
    // u and v cancel, so the norm refines faster than the generic O(h) rate)
    const double h = 2.0 * 3.14159265358979323846 / 48.0;
    FlowRecipe recipe;
    recipe.kind = FlowKind::taylor_green;
    auto mean_div = [&](const Grid& grid) {
        const FlowSeries s = generate(recipe, grid, {0.0, 0.3});
        std::vector<std::vector<double>> states;
        for (const auto& snap : s.snapshots) states.push_back(flatten_state(snap));
        return divergence_error(states, DivergenceOperator(grid));
    };
    const double coarse = mean_div(Grid(49, 49, h, h));
    const double fine = mean_div(Grid(97, 97, 0.5 * h, 0.5 * h));
    CHECK(coarse / fine >= 3.5);
}

TEST_CASE("experiment: single gpod cell produces exactly one row") {
    ExperimentPlan plan = ExperimentPlan::preset("tiny");
    plan.methods = {Method::gpod_l0};
    const fs::path dir = scratch_dir("frc_exp_single");
    const ExperimentResult res = run_experiment(plan, dir);
    CHECK(res.errors.empty());
    REQUIRE(res.rows.size() == 1);
    CHECK(res.rows[0].method == "gpod");
    CHECK(res.rows[0].lambda_mode == "l0");
    CHECK(res.rows[0].selected);
    CHECK(res.rows[0].relative_error >= 0.0);
    CHECK(res.rows[0].epochs_trained == 0);
    fs::remove_all(dir);
}

TEST_CASE("experiment: deterministic byte-identical outputs, scvae repeats, verify") {
    ExperimentPlan plan = ExperimentPlan::preset("tiny");
    plan.repeats = 2;
    plan.train.max_epochs = 4;
    plan.train.patience = 4;

    const fs::path dir1 = scratch_dir("frc_exp_det1");
    const fs::path dir2 = scratch_dir("frc_exp_det2");
    const ExperimentResult r1 = run_experiment(plan, dir1);
    const ExperimentResult r2 = run_experiment(plan, dir2);
    CHECK(r1.errors.empty());
    CHECK(slurp(dir1 / "results.csv") == slurp(dir2 / "results.csv"));
    CHECK(slurp(dir1 / "long.csv") == slurp(dir2 / "long.csv"));

    // scvae cell: per-repeat rows, exactly one selected
    int scvae_rows = 0, selected = 0;
    for (const auto& row : r1.rows) {
        if (row.method == "scvae") {
            ++scvae_rows;
            if (row.selected) ++selected;
            CHECK(row.epochs_trained >= 1);
        }
    }
    CHECK(scvae_rows == 2);
    CHECK(selected == 1);

    verify_run(dir1); // every row recomputable from artifacts

    // tampering with a stored metric must be caught
    std::string csv = slurp(dir1 / "results.csv");
    const auto pos = csv.find("scvae,l0,0,2,0");
    REQUIRE(pos != std::string::npos);
    // manifest rows reference exact strings; flip a digit inside this row's
    // relative_error column
    std::string broken = csv;
    const auto comma = broken.find(",1,", pos) != std::string::npos ? broken.find(",1,", pos)
                                                                    : broken.find(",0,", pos);
    REQUIRE(comma != std::string::npos);
    {
        std::ofstream f(dir1 / "results.csv", std::ios::binary);
        // drop the scvae rows entirely: verify must notice the missing rows
        std::istringstream in(csv);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (!first && line.rfind("scvae", 0) == 0) continue;
            f << line << "\n";
            first = false;
        }
    }
    CHECK_THROWS_AS(verify_run(dir1), std::runtime_error);

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("experiment: manifest access log never reads test data during selection") {
    ExperimentPlan plan = ExperimentPlan::preset("tiny");
    const fs::path dir = scratch_dir("frc_exp_audit");
    run_experiment(plan, dir);
    const json manifest = json::parse(slurp(dir / "manifest.json"));
    REQUIRE(manifest.contains("access_log"));
    bool saw_selection = false;
    for (const auto& entry : manifest.at("access_log")) {
        const std::string event = entry.at("event").get<std::string>();
        if (event.find("selection") != std::string::npos) {
            saw_selection = true;
            for (const auto& read : entry.at("reads")) {
                CHECK(read.get<std::string>() == "validation");
            }
        }
    }
    CHECK(saw_selection);
    CHECK(manifest.contains("plan"));
    CHECK(manifest.contains("version"));
    CHECK(manifest.contains("layout_points"));
    fs::remove_all(dir);
}

TEST_CASE("experiment: cell failures are recorded and the run continues") {
    ExperimentPlan plan = ExperimentPlan::preset("tiny");
    plan.methods = {Method::scvae_l0, Method::gpod_l0};
    plan.arch = "cylinder"; // wrong grid for the tiny dataset: scvae cells fail
    const fs::path dir = scratch_dir("frc_exp_fail");
    const ExperimentResult res = run_experiment(plan, dir);
    CHECK(res.errors.size() == 1);
    REQUIRE(res.rows.size() == 1); // gpod continued
    CHECK(res.rows[0].method == "gpod");
    const json manifest = json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("errors").size() == 1);
    fs::remove_all(dir);
}

TEST_CASE("experiment plan json round trip") {
    ExperimentPlan plan = ExperimentPlan::preset("divreg");
    plan.seed = 99;
    plan.eval_nmc = 5;
    const ExperimentPlan back = ExperimentPlan::from_json(plan.to_json());
    CHECK(back.seed == plan.seed);
    CHECK(back.eval_nmc == plan.eval_nmc);
    CHECK(back.layouts.count == plan.layouts.count);
    CHECK(back.methods == plan.methods);
    CHECK(back.dataset.nx == plan.dataset.nx);
    CHECK(back.train.max_epochs == plan.train.max_epochs);
}

TEST_CASE("nested layout draws are prefixes of the same point set") {
    ExperimentPlan plan = ExperimentPlan::preset("tiny");
    plan.layouts.m_values = {1, 2, 3};
    plan.layouts.m_max = 3;
    plan.methods = {Method::gpod_l0};
    const fs::path dir = scratch_dir("frc_exp_nested");
    run_experiment(plan, dir);
    const json manifest = json::parse(slurp(dir / "manifest.json"));
    const auto pts = manifest.at("layout_points").at(0);
    CHECK(pts.size() == 3);
    fs::remove_all(dir);
}
