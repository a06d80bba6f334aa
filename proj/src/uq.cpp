#include "flowrecon/uq.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "flowrecon/frc_io.hpp"
#include "flowrecon/rng.hpp"
#include "flowrecon/stats.hpp"

namespace flowrecon {

PosteriorSummary summarize(PosteriorSampler& dist, int n_mc, std::uint64_t seed) {
    if (n_mc < 2) throw std::invalid_argument("summarize: N_MC must be >= 2");
    const int n2 = dist.state_dim();
    const int latent = dist.latent_dim();

    Eigen::MatrixXd samples(n2, n_mc);
    Rng rng(derive_seed(seed, "uq-draws"));
    std::vector<double> eps(static_cast<std::size_t>(latent));
    for (int s = 0; s < n_mc; ++s) {
        for (double& e : eps) e = rng.normal();
        const std::vector<double> x = dist.draw(eps);
        if (static_cast<int>(x.size()) != n2) {
            throw std::runtime_error("summarize: sampler returned wrong state length");
        }
        for (int k = 0; k < n2; ++k) samples(k, s) = x[static_cast<std::size_t>(k)];
    }

    PosteriorSummary out;
    out.n_samples = n_mc;
    out.dof = std::min(n_mc, n2);
    out.mean.resize(static_cast<std::size_t>(n2));
    Eigen::VectorXd mean = samples.rowwise().mean();
    for (int k = 0; k < n2; ++k) out.mean[static_cast<std::size_t>(k)] = mean(k);

    // Sigma = A A^T with A = centered / sqrt(N_MC - 1); thin SVD of A gives
    // U and S = singular values squared.
    Eigen::MatrixXd centered = samples.colwise() - mean;
    centered /= std::sqrt(static_cast<double>(n_mc - 1));
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
    const int q = static_cast<int>(svd.singularValues().size());
    out.n_factors = q;
    out.factors.resize(static_cast<std::size_t>(n2) * q);
    out.spectrum.resize(static_cast<std::size_t>(q));
    for (int c = 0; c < q; ++c) {
        const double s = svd.singularValues()(c);
        out.spectrum[static_cast<std::size_t>(c)] = s * s;
        for (int r = 0; r < n2; ++r) {
            out.factors[static_cast<std::size_t>(r) * q + c] = svd.matrixU()(r, c);
        }
    }
    return out;
}

std::pair<double, double> interval(const PosteriorSummary& summary, int coordinate, double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("interval: p must lie in (0,1)");
    if (coordinate < 0 || coordinate >= static_cast<int>(summary.mean.size())) {
        throw std::invalid_argument("interval: coordinate out of range");
    }
    const double radius = std::sqrt(chi_squared_quantile(summary.dof, p));
    // ||u_n^T S^(1/2)||_2 = sqrt(sum_j U_nj^2 S_j)
    double s = 0.0;
    for (int c = 0; c < summary.n_factors; ++c) {
        const double u = summary.factor_at(coordinate, c);
        s += u * u * summary.spectrum[static_cast<std::size_t>(c)];
    }
    const double half_width = radius * std::sqrt(s);
    const double center = summary.mean[static_cast<std::size_t>(coordinate)];
    return {center - half_width, center + half_width};
}

bool region_membership(const PosteriorSummary& summary, const std::vector<double>& x, double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("region_membership: p must lie in (0,1)");
    }
    if (x.size() != summary.mean.size()) {
        throw std::invalid_argument("region_membership: state length mismatch");
    }
    const int n2 = static_cast<int>(x.size());
    double max_ev = 0.0;
    for (const double s : summary.spectrum) max_ev = std::max(max_ev, s);
    const double cut = max_ev * 1e-12;

    double dist = 0.0;
    for (int c = 0; c < summary.n_factors; ++c) {
        const double ev = summary.spectrum[static_cast<std::size_t>(c)];
        if (ev <= cut) continue;
        double proj = 0.0;
        for (int r = 0; r < n2; ++r) {
            proj += summary.factor_at(r, c) *
                    (x[static_cast<std::size_t>(r)] - summary.mean[static_cast<std::size_t>(r)]);
        }
        dist += proj * proj / ev;
    }
    return dist <= chi_squared_quantile(summary.dof, p);
}

std::vector<FlowSnapshot> sample_fields(PosteriorSampler& dist, const Grid& grid, int count,
                                        std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sample_fields: count must be >= 1");
    if (dist.state_dim() != grid.n_state()) {
        throw std::invalid_argument("sample_fields: sampler state does not match grid");
    }
    Rng rng(derive_seed(seed, "uq-fields"));
    std::vector<FlowSnapshot> out;
    out.reserve(static_cast<std::size_t>(count));
    std::vector<double> eps(static_cast<std::size_t>(dist.latent_dim()));
    for (int s = 0; s < count; ++s) {
        for (double& e : eps) e = rng.normal();
        out.push_back(unflatten_state(grid, dist.draw(eps), s));
    }
    return out;
}

void write_montage_csv(const std::filesystem::path& dir,
                       const std::vector<FlowSnapshot>& fields) {
    if (fields.empty()) throw std::invalid_argument("write_montage_csv: no fields");
    const Grid& grid = fields[0].grid;
    const int count = static_cast<int>(fields.size());
    int tiles = 1;
    while (tiles * tiles < count) ++tiles;

    for (const bool v_channel : {false, true}) {
        std::ofstream f(dir / (v_channel ? "montage_v.csv" : "montage_u.csv"));
        for (int tile_row = 0; tile_row < tiles; ++tile_row) {
            for (int j = 0; j < grid.ny; ++j) {
                bool first = true;
                for (int tile_col = 0; tile_col < tiles; ++tile_col) {
                    const int s = tile_row * tiles + tile_col;
                    for (int i = 0; i < grid.nx; ++i) {
                        if (!first) f << ",";
                        first = false;
                        if (s < count) {
                            const auto& chan = v_channel ? fields[static_cast<std::size_t>(s)].v
                                                         : fields[static_cast<std::size_t>(s)].u;
                            f << format_double(chan[static_cast<std::size_t>(grid.index(i, j))]);
                        } else {
                            f << "0";
                        }
                    }
                }
                f << "\n";
            }
        }
        if (!f) throw std::runtime_error("write_montage_csv: cannot write in " + dir.string());
    }
}

} // namespace flowrecon
