#include "flowrecon/pod.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flowrecon/linalg.hpp"
#include "flowrecon/metrics.hpp"

namespace flowrecon {

using nlohmann::json;

PodBasis PodBasis::prefix(int r_prefix) const {
    if (r_prefix < 1 || r_prefix > r) {
        throw std::invalid_argument("PodBasis::prefix: invalid component count");
    }
    PodBasis out;
    out.grid = grid;
    out.r = r_prefix;
    out.mean_removed = mean_removed;
    out.mean = mean;
    out.scaling = scaling;
    out.singular_values.assign(singular_values.begin(), singular_values.begin() + r_prefix);
    out.phi.resize(static_cast<std::size_t>(n_state()) * r_prefix);
    for (int row = 0; row < n_state(); ++row) {
        for (int c = 0; c < r_prefix; ++c) {
            out.phi[static_cast<std::size_t>(row) * r_prefix + c] = phi_at(row, c);
        }
    }
    return out;
}

std::vector<double> PodBasis::expand(const std::vector<double>& coefficients) const {
    if (static_cast<int>(coefficients.size()) != r) {
        throw std::invalid_argument("PodBasis::expand: coefficient length mismatch");
    }
    std::vector<double> x(static_cast<std::size_t>(n_state()), 0.0);
    for (int row = 0; row < n_state(); ++row) {
        double s = mean_removed ? mean[static_cast<std::size_t>(row)] : 0.0;
        for (int c = 0; c < r; ++c) s += phi_at(row, c) * coefficients[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(row)] = s;
    }
    return x;
}

PodBasis compute_pod(const FlowSeries& train, int r, const ScalingParams& scaling,
                     bool mean_removed) {
    const int n2 = train.grid.n_state();
    const int k = static_cast<int>(train.size());
    if (r < 1 || r > std::min(n2, k)) {
        throw std::invalid_argument("compute_pod: r must satisfy 1 <= r <= min(2N, K)");
    }

    Eigen::MatrixXd snapshots(n2, k);
    for (int c = 0; c < k; ++c) {
        const auto x = scale_state(scaling, flatten_state(train.snapshots[static_cast<std::size_t>(c)]));
        for (int row = 0; row < n2; ++row) snapshots(row, c) = x[static_cast<std::size_t>(row)];
    }
    Eigen::VectorXd col_mean;
    if (mean_removed) {
        col_mean = snapshots.rowwise().mean();
        snapshots.colwise() -= col_mean;
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots, Eigen::ComputeThinU);
    PodBasis basis;
    basis.grid = train.grid;
    basis.r = r;
    basis.scaling = scaling;
    basis.mean_removed = mean_removed;
    if (mean_removed) {
        basis.mean.resize(static_cast<std::size_t>(n2));
        for (int row = 0; row < n2; ++row) basis.mean[static_cast<std::size_t>(row)] = col_mean(row);
    }
    basis.singular_values.resize(static_cast<std::size_t>(r));
    basis.phi.resize(static_cast<std::size_t>(n2) * r);
    for (int c = 0; c < r; ++c) {
        basis.singular_values[static_cast<std::size_t>(c)] = svd.singularValues()(c);
        for (int row = 0; row < n2; ++row) {
            basis.phi[static_cast<std::size_t>(row) * r + c] = svd.matrixU()(row, c);
        }
    }
    return basis;
}

void GpodConfig::validate() const {
    if (r < 1) throw std::invalid_argument("GpodConfig: r must be >= 1");
    if (lambda < 0.0) throw std::invalid_argument("GpodConfig: lambda must be >= 0");
}

GpodSolution gpod_reconstruct(const PodBasis& basis, const SamplingOperator& op,
                              const DivergenceOperator& div, const std::vector<double>& m,
                              const GpodConfig& cfg) {
    cfg.validate();
    if (cfg.r > basis.r) {
        throw std::invalid_argument("gpod_reconstruct: cfg.r exceeds basis size");
    }
    const int m2 = op.n_measurements();
    if (static_cast<int>(m.size()) != m2) {
        throw std::invalid_argument("gpod_reconstruct: measurement length mismatch");
    }
    const int r = cfg.r;
    const int n2 = basis.n_state();

    const std::vector<double> m_scaled = scale_measurements(basis.scaling, m);

    // B = C Phi: sampled rows of the basis.
    std::vector<double> b(static_cast<std::size_t>(m2) * r);
    for (int row = 0; row < m2; ++row) {
        const int src = op.state_index(row);
        for (int c = 0; c < r; ++c) b[static_cast<std::size_t>(row) * r + c] = basis.phi_at(src, c);
    }

    // Normal matrix G = B^T B (+ lambda W^T W) and rhs = B^T (m - C mean)
    // (- lambda W^T L mean when the basis carries a removed mean).
    std::vector<double> g(static_cast<std::size_t>(r) * r, 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(r), 0.0);
    for (int row = 0; row < m2; ++row) {
        const double* brow = &b[static_cast<std::size_t>(row) * r];
        double m_eff = m_scaled[static_cast<std::size_t>(row)];
        if (basis.mean_removed) m_eff -= basis.mean[static_cast<std::size_t>(op.state_index(row))];
        for (int i = 0; i < r; ++i) {
            rhs[static_cast<std::size_t>(i)] += brow[i] * m_eff;
            for (int j = i; j < r; ++j) g[static_cast<std::size_t>(i) * r + j] += brow[i] * brow[j];
        }
    }

    if (cfg.lambda > 0.0) {
        // W = L_div Phi with the scaling weights (columns are the physical
        // divergences of the basis fields).
        const int n = basis.grid.n_points();
        std::vector<double> w(static_cast<std::size_t>(n) * r);
        std::vector<double> col(static_cast<std::size_t>(n2));
        for (int c = 0; c < r; ++c) {
            for (int row = 0; row < n2; ++row) col[static_cast<std::size_t>(row)] = basis.phi_at(row, c);
            const auto dcol = div.apply_weighted(col, basis.scaling.u_halfwidth,
                                                 basis.scaling.v_halfwidth);
            for (int row = 0; row < n; ++row) w[static_cast<std::size_t>(row) * r + c] =
                dcol[static_cast<std::size_t>(row)];
        }
        std::vector<double> l_mean;
        if (basis.mean_removed) {
            l_mean = div.apply_weighted(basis.mean, basis.scaling.u_halfwidth,
                                        basis.scaling.v_halfwidth);
        }
        for (int row = 0; row < n; ++row) {
            const double* wrow = &w[static_cast<std::size_t>(row) * r];
            for (int i = 0; i < r; ++i) {
                if (!l_mean.empty()) {
                    rhs[static_cast<std::size_t>(i)] -= cfg.lambda * wrow[i] *
                                                        l_mean[static_cast<std::size_t>(row)];
                }
                for (int j = i; j < r; ++j) {
                    g[static_cast<std::size_t>(i) * r + j] += cfg.lambda * wrow[i] * wrow[j];
                }
            }
        }
    }
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < i; ++j) g[static_cast<std::size_t>(i) * r + j] =
            g[static_cast<std::size_t>(j) * r + i];
    }

    GpodSolution sol;
    auto chol = cholesky_solve(g, rhs, r);
    if (chol) {
        sol.coefficients = std::move(*chol);
    } else {
        sol.rank_deficient = true;
        sol.coefficients = symmetric_least_norm_solve(g, rhs, r);
    }

    PodBasis view = (r == basis.r) ? basis : basis.prefix(r);
    sol.reconstruction = view.expand(sol.coefficients);
    return sol;
}

GpodConfig select_gpod_hyperparams(const PodBasis& basis_family, const FlowSeries& validation,
                                   const SamplingOperator& op, const DivergenceOperator& div,
                                   const std::vector<int>& r_grid,
                                   const std::vector<double>& lambda_grid) {
    if (r_grid.empty() || lambda_grid.empty()) {
        throw std::invalid_argument("select_gpod_hyperparams: grids must be nonempty");
    }
    std::vector<std::vector<double>> truths;
    std::vector<std::vector<double>> measurements;
    truths.reserve(validation.size());
    for (const auto& s : validation.snapshots) {
        truths.push_back(flatten_state(s));
        measurements.push_back(op.apply(truths.back()));
    }

    GpodConfig best;
    double best_err = 0.0;
    bool have_best = false;
    for (const int r : r_grid) {
        if (r < 1 || r > basis_family.r) continue;
        for (const double lambda : lambda_grid) {
            GpodConfig cfg{r, lambda};
            std::vector<std::vector<double>> preds;
            preds.reserve(truths.size());
            for (const auto& m : measurements) {
                preds.push_back(gpod_reconstruct(basis_family, op, div, m, cfg).unscaled(basis_family));
            }
            const double err = relative_error(preds, truths);
            // grid order is (r asc, lambda asc); improvements below rounding
            // noise count as ties so the smallest (r, lambda) wins
            if (!have_best || err < best_err - 1e-12 * (1.0 + best_err)) {
                best = cfg;
                best_err = err;
                have_best = true;
            }
        }
    }
    if (!have_best) {
        throw std::invalid_argument("select_gpod_hyperparams: no feasible grid point");
    }
    return best;
}

void save_pod_basis(const std::filesystem::path& file, const PodBasis& basis) {
    json header;
    header["fmt"] = "frcbasis-1";
    header["nx"] = basis.grid.nx;
    header["ny"] = basis.grid.ny;
    header["dx"] = basis.grid.dx;
    header["dy"] = basis.grid.dy;
    header["r"] = basis.r;
    header["mean_removed"] = basis.mean_removed;
    header["mean"] = basis.mean;
    header["singular_values"] = basis.singular_values;
    header["scaling"] = {{"u_center", basis.scaling.u_center},
                         {"v_center", basis.scaling.v_center},
                         {"u_halfwidth", basis.scaling.u_halfwidth},
                         {"v_halfwidth", basis.scaling.v_halfwidth}};
    std::ofstream f(file, std::ios::binary);
    f << header.dump() << "\n";
    f.write(reinterpret_cast<const char*>(basis.phi.data()),
            static_cast<std::streamsize>(basis.phi.size() * sizeof(double)));
    if (!f) throw std::runtime_error("save_pod_basis: cannot write " + file.string());
}

PodBasis load_pod_basis(const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw std::invalid_argument("load_pod_basis: cannot open " + file.string());
    std::string line;
    std::getline(f, line);
    json header = json::parse(line);
    if (header.value("fmt", "") != "frcbasis-1") {
        throw std::invalid_argument("load_pod_basis: not a frcbasis-1 file");
    }
    PodBasis basis;
    basis.grid = Grid(header.at("nx").get<int>(), header.at("ny").get<int>(),
                      header.at("dx").get<double>(), header.at("dy").get<double>());
    basis.r = header.at("r").get<int>();
    basis.mean_removed = header.at("mean_removed").get<bool>();
    basis.mean = header.value("mean", std::vector<double>{});
    basis.singular_values = header.at("singular_values").get<std::vector<double>>();
    const auto& sc = header.at("scaling");
    basis.scaling.u_center = sc.at("u_center").get<double>();
    basis.scaling.v_center = sc.at("v_center").get<double>();
    basis.scaling.u_halfwidth = sc.at("u_halfwidth").get<double>();
    basis.scaling.v_halfwidth = sc.at("v_halfwidth").get<double>();
    basis.phi.resize(static_cast<std::size_t>(basis.n_state()) * basis.r);
    f.read(reinterpret_cast<char*>(basis.phi.data()),
           static_cast<std::streamsize>(basis.phi.size() * sizeof(double)));
    if (!f) throw std::invalid_argument("load_pod_basis: truncated blob in " + file.string());
    return basis;
}

} // namespace flowrecon
