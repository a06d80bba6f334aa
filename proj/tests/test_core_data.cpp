#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "flowrecon/divergence.hpp"
#include "flowrecon/frc_io.hpp"
#include "flowrecon/grid.hpp"
#include "flowrecon/rng.hpp"
#include "flowrecon/sampling.hpp"
#include "flowrecon/scaling.hpp"
#include "flowrecon/split.hpp"
#include "flowrecon/synthetic.hpp"
#include "oracles.hpp"

using namespace flowrecon;

namespace {

FlowSnapshot random_snapshot(const Grid& grid, Rng& rng, int t) {
    std::vector<double> u(static_cast<std::size_t>(grid.n_points()));
    std::vector<double> v(u.size());
    for (double& x : u) x = rng.uniform(-2.0, 2.0);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return FlowSnapshot(grid, std::move(u), std::move(v), t);
}

FlowSeries random_series(const Grid& grid, int k, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<FlowSnapshot> snaps;
    for (int t = 0; t < k; ++t) snaps.push_back(random_snapshot(grid, rng, t));
    return FlowSeries(grid, std::move(snaps));
}

/// u = a + bx + cy, v = d + ex + fy (divergence b + f, constant).
FlowSnapshot affine_snapshot(const Grid& grid, double a, double b, double c, double d, double e,
                             double f) {
    std::vector<double> u(static_cast<std::size_t>(grid.n_points()));
    std::vector<double> v(u.size());
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const int k = grid.index(i, j);
            u[static_cast<std::size_t>(k)] = a + b * grid.x(i) + c * grid.y(j);
            v[static_cast<std::size_t>(k)] = d + e * grid.x(i) + f * grid.y(j);
        }
    return FlowSnapshot(grid, std::move(u), std::move(v), 0);
}

} // namespace

TEST_CASE("grid invariants and validation") {
    CHECK_THROWS_AS(Grid(1, 5, 0.1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(Grid(5, 5, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(Grid(5, 5, 0.1, -1.0), std::invalid_argument);
    const Grid g(4, 3, 0.5, 0.25);
    CHECK(g.n_points() == 12);
    CHECK(g.n_state() == 24);
    CHECK(g.index(1, 2) == 9);
}

TEST_CASE("snapshot validation rejects bad data") {
    const Grid g(2, 2, 1.0, 1.0);
    CHECK_THROWS_AS(FlowSnapshot(g, {1, 2, 3}, {1, 2, 3, 4}, 0), std::invalid_argument);
    CHECK_THROWS_AS(FlowSnapshot(g, {1, 2, 3, std::nan("")}, {1, 2, 3, 4}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(FlowSeries(g, {}), std::invalid_argument);
    const FlowSnapshot a(g, {1, 2, 3, 4}, {5, 6, 7, 8}, 0);
    CHECK_THROWS_AS(FlowSeries(g, {a, a}), std::invalid_argument); // time not increasing
}

TEST_CASE("flatten_state: 2x2 example and zero field") {
    const Grid g(2, 2, 1.0, 1.0);
    const FlowSnapshot s(g, {1, 2, 3, 4}, {5, 6, 7, 8}, 0);
    CHECK(flatten_state(s) == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});

    const FlowSnapshot zero(g, {0, 0, 0, 0}, {0, 0, 0, 0}, 0);
    CHECK(flatten_state(zero) == std::vector<double>(8, 0.0));
}

TEST_CASE("flatten/unflatten round trip on 50 random snapshots") {
    const Grid g(7, 5, 0.3, 0.4);
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        const FlowSnapshot s = random_snapshot(g, rng, t);
        const FlowSnapshot back = unflatten_state(g, flatten_state(s), s.time_index);
        CHECK(back.u == s.u);
        CHECK(back.v == s.v);
        CHECK(back.time_index == s.time_index);
    }
}

TEST_CASE("apply_sampling: single sensor and full-layout examples") {
    const Grid g(2, 2, 1.0, 1.0);
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};

    const SamplingOperator single(SensorLayout({{0, 0}}), g);
    CHECK(single.apply(x) == std::vector<double>{1, 5});

    const SamplingOperator full(SensorLayout({{0, 0}, {1, 0}, {0, 1}, {1, 1}}), g);
    const auto m = full.apply(x);
    CHECK(m == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("apply_sampling matches the dense C matrix on random layouts") {
    const Grid g(9, 6, 0.2, 0.3);
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        std::set<std::pair<int, int>> pts;
        while (pts.size() < 7) {
            pts.insert({static_cast<int>(rng.uniform_index(9)),
                        static_cast<int>(rng.uniform_index(6))});
        }
        const SamplingOperator op(
            SensorLayout(std::vector<std::pair<int, int>>(pts.begin(), pts.end())), g);
        std::vector<double> x(static_cast<std::size_t>(g.n_state()));
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        const auto dense = oracle::dense_sampling_matrix(op);
        CHECK(op.apply(x) ==
              oracle::dense_matvec(dense, x, op.n_measurements(), op.n_state()));
    }
}

TEST_CASE("sampling rejects out-of-grid and duplicate sensors") {
    const Grid g(4, 4, 1.0, 1.0);
    CHECK_THROWS_AS(SamplingOperator(SensorLayout({{4, 0}}), g), std::invalid_argument);
    CHECK_THROWS_AS(SensorLayout({{1, 1}, {1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(SensorLayout(std::vector<std::pair<int, int>>{}), std::invalid_argument);
}

TEST_CASE("divergence: affine fields are exact") {
    const Grid g(12, 9, 0.17, 0.29);
    const DivergenceOperator div(g);

    // u = y, v = x: analytic divergence 0
    const auto d0 = div.apply(flatten_state(affine_snapshot(g, 0, 0, 1, 0, 1, 0)));
    for (const double v : d0) CHECK(std::abs(v) <= 1e-12);

    // u = x, v = 0: analytic divergence 1
    const auto d1 = div.apply(flatten_state(affine_snapshot(g, 0, 1, 0, 0, 0, 0)));
    for (const double v : d1) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    // constants are annihilated exactly
    const auto dc = div.apply(flatten_state(affine_snapshot(g, 0.1, 0, 0, -0.7, 0, 0)));
    for (const double v : dc) CHECK(v == 0.0);
}

TEST_CASE("divergence is linear to 1e-12") {
    const Grid g(8, 7, 0.5, 0.3);
    const DivergenceOperator div(g);
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x(static_cast<std::size_t>(g.n_state())), y(x.size());
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        for (double& v : y) v = rng.uniform(-1.0, 1.0);
        const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
        std::vector<double> combo(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) combo[k] = a * x[k] + b * y[k];
        const auto lhs = div.apply(combo);
        const auto lx = div.apply(x), ly = div.apply(y);
        for (std::size_t k = 0; k < lhs.size(); ++k) {
            CHECK(lhs[k] == doctest::Approx(a * lx[k] + b * ly[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("divergence refinement: Taylor-Green max |div| drops >= 3.5x at half h") {
    const double h = 2.0 * 3.14159265358979323846 / 64.0;
    const Grid coarse(65, 65, h, h);
    const Grid fine(129, 129, 0.5 * h, 0.5 * h);
    FlowRecipe recipe;
    recipe.kind = FlowKind::taylor_green;

    auto max_div = [&](const Grid& g) {
        const FlowSeries s = generate(recipe, g, {0.0});
        const auto d = DivergenceOperator(g).apply(flatten_state(s.snapshots[0]));
        double m = 0.0;
        for (const double v : d) m = std::max(m, std::abs(v));
        return m;
    };
    const double coarse_err = max_div(coarse);
    const double fine_err = max_div(fine);
    CHECK(coarse_err / fine_err >= 3.5);
}

TEST_CASE("divergence adjoint satisfies the inner-product identity") {
    const Grid g(9, 8, 0.4, 0.7);
    const DivergenceOperator div(g);
    Rng rng(23);
    std::vector<double> x(static_cast<std::size_t>(g.n_state())),
        y(static_cast<std::size_t>(g.n_points()));
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    for (double& v : y) v = rng.uniform(-1.0, 1.0);
    const auto lx = div.apply_weighted(x, 1.3, 0.8);
    const auto lty = div.apply_weighted_adjoint(y, 1.3, 0.8);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) lhs += lx[k] * y[k];
    for (std::size_t k = 0; k < x.size(); ++k) rhs += x[k] * lty[k];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("scaling: min-max arithmetic and constant-channel fallback") {
    const Grid g(2, 2, 1.0, 1.0);
    // u in [-2, 4] -> center 1, halfwidth 3
    const FlowSnapshot a(g, {-2, 4, 0, 1}, {0, 0.5, 1, 0.25}, 0);
    const ScalingParams p = compute_scaling(FlowSeries(g, {a}));
    CHECK(p.u_center == doctest::Approx(1.0));
    CHECK(p.u_halfwidth == doctest::Approx(3.0));

    // constant u == 5 -> center 5, halfwidth 1
    const FlowSnapshot c(g, {5, 5, 5, 5}, {0, 1, 2, 3}, 0);
    const ScalingParams pc = compute_scaling(FlowSeries(g, {c}));
    CHECK(pc.u_center == doctest::Approx(5.0));
    CHECK(pc.u_halfwidth == doctest::Approx(1.0));
    const FlowSnapshot scaled = scale(pc, c);
    for (const double v : scaled.u) CHECK(v == 0.0);
}

TEST_CASE("scaling: round trip and training range") {
    const Grid g(6, 5, 0.2, 0.2);
    const FlowSeries train = random_series(g, 8, 31);
    const ScalingParams p = compute_scaling(train);

    for (const auto& s : train.snapshots) {
        const FlowSnapshot sc = scale(p, s);
        for (const double v : sc.u) CHECK((v >= -1.0 && v <= 1.0));
        for (const double v : sc.v) CHECK((v >= -1.0 && v <= 1.0));
        const FlowSnapshot back = unscale(p, sc);
        for (std::size_t k = 0; k < s.u.size(); ++k) {
            CHECK(back.u[k] == doctest::Approx(s.u[k]).epsilon(1e-12));
            CHECK(back.v[k] == doctest::Approx(s.v[k]).epsilon(1e-12));
        }
    }

    // values outside the training extremes leave [-1, 1]
    std::vector<double> u(static_cast<std::size_t>(g.n_points()), 0.0);
    u[0] = p.u_center + 2.5 * p.u_halfwidth;
    const FlowSnapshot out(g, u, std::vector<double>(u.size(), 0.0), 0);
    CHECK(scale(p, out).u[0] > 1.0);
}

TEST_CASE("scaled divergence recovers the physical divergence") {
    const Grid g(10, 9, 0.3, 0.5);
    const DivergenceOperator div(g);
    Rng rng(41);
    const FlowSnapshot s = random_snapshot(g, rng, 0);
    ScalingParams p;
    p.u_center = 0.4;
    p.v_center = -0.2;
    p.u_halfwidth = 1.7;
    p.v_halfwidth = 0.6;
    const auto direct = div.apply(flatten_state(s));
    const auto via_scaled = div.apply_weighted(scale_state(p, flatten_state(s)), p.u_halfwidth,
                                               p.v_halfwidth);
    for (std::size_t k = 0; k < direct.size(); ++k) {
        CHECK(via_scaled[k] == doctest::Approx(direct[k]).epsilon(1e-10));
    }
}

TEST_CASE("split: size examples") {
    const Grid g(2, 2, 1.0, 1.0);
    SplitSpec spec;
    spec.test_fraction = 0.15;
    spec.validation_fraction = 0.30;

    const SplitResult a = split(random_series(g, 1001, 3), spec);
    CHECK(a.train.size() == 596);
    CHECK(a.validation.size() == 255);
    CHECK(a.test.size() == 150);

    const SplitResult b = split(random_series(g, 10, 3), spec);
    CHECK(b.train.size() == 6);
    CHECK(b.validation.size() == 3);
    CHECK(b.test.size() == 1);
}

TEST_CASE("split: sequential order, random partition, determinism") {
    const Grid g(2, 2, 1.0, 1.0);
    const FlowSeries series = random_series(g, 40, 9);
    SplitSpec spec;
    spec.test_fraction = 0.2;
    spec.validation_fraction = 0.25;

    const SplitResult seq = split(series, spec);
    CHECK(seq.train.snapshots.back().time_index < seq.validation.snapshots.front().time_index);
    CHECK(seq.validation.snapshots.back().time_index < seq.test.snapshots.front().time_index);

    spec.mode = SplitMode::random;
    spec.seed = 77;
    const SplitResult r1 = split(series, spec);
    const SplitResult r2 = split(series, spec);
    CHECK(r1.train.size() == seq.train.size());
    CHECK(r1.validation.size() == seq.validation.size());
    CHECK(r1.test.size() == seq.test.size());

    std::multiset<int> all;
    for (const auto& s : r1.train.snapshots) all.insert(s.time_index);
    for (const auto& s : r1.validation.snapshots) all.insert(s.time_index);
    for (const auto& s : r1.test.snapshots) all.insert(s.time_index);
    CHECK(all.size() == series.size());
    std::multiset<int> expect;
    for (int t = 0; t < 40; ++t) expect.insert(t);
    CHECK(all == expect);

    for (std::size_t i = 0; i < r1.test.size(); ++i) {
        CHECK(r1.test.snapshots[i].time_index == r2.test.snapshots[i].time_index);
    }
}

TEST_CASE("split rejects degenerate fractions") {
    const Grid g(2, 2, 1.0, 1.0);
    SplitSpec bad;
    bad.test_fraction = 0.9;
    bad.validation_fraction = 0.99;
    CHECK_THROWS_AS(split(random_series(g, 10, 1), bad), std::invalid_argument);
    SplitSpec tiny;
    tiny.test_fraction = 0.05;
    tiny.validation_fraction = 0.05;
    CHECK_THROWS_AS(split(random_series(g, 3, 1), tiny), std::invalid_argument);
}

TEST_CASE("FRC1 container round trip") {
    const Grid g(5, 4, 0.25, 0.5);
    const FlowSeries series = random_series(g, 7, 13);
    const auto dir = std::filesystem::temp_directory_path() / "frc1_roundtrip_test";
    std::filesystem::remove_all(dir);
    write_frc1(dir, series);
    const FlowSeries back = read_frc1(dir);
    REQUIRE(back.size() == series.size());
    CHECK(back.grid == g);
    for (std::size_t s = 0; s < series.size(); ++s) {
        CHECK(back.snapshots[s].u == series.snapshots[s].u);
        CHECK(back.snapshots[s].v == series.snapshots[s].v);
    }
    std::filesystem::remove_all(dir);
}
