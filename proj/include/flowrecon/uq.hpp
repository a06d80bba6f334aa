#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "flowrecon/grid.hpp"
#include "flowrecon/sampler.hpp"

namespace flowrecon {

/// Monte-Carlo posterior predictive summary. The empirical covariance
/// Sigma = U diag(S) U^T is stored through the thin SVD of the centered
/// sample matrix (2N x 2N is never materialized), so S holds at most
/// N_MC nonzero eigenvalues. The degrees of freedom are k = min(N_MC, 2N);
/// note the sample covariance itself has rank at most N_MC - 1.
struct PosteriorSummary {
    std::vector<double> mean;    // x_hat*, length 2N
    std::vector<double> factors; // U, 2N x n_factors, row-major
    std::vector<double> spectrum; // S: eigenvalues of Sigma, nonincreasing, >= 0
    int n_factors = 0;
    int n_samples = 0; // N_MC
    int dof = 0;       // k = min(N_MC, 2N)

    double factor_at(int row, int col) const {
        return factors[static_cast<std::size_t>(row) * n_factors + col];
    }
};

/// Draws n_mc samples from the handle (eps ~ N(0,I) from the seed) and builds
/// mean + covariance factors. n_mc >= 2.
PosteriorSummary summarize(PosteriorSampler& dist, int n_mc, std::uint64_t seed);

/// Per-coordinate confidence interval: center (x_hat*)_n, half-width
/// sqrt(chi2_k(p)) * ||u_n^T S^(1/2)||_2.
std::pair<double, double> interval(const PosteriorSummary& summary, int coordinate, double p);

/// Mahalanobis membership (x - x_hat*)^T Sigma^+ (x - x_hat*) <= chi2_k(p).
/// Components of x - x_hat* outside the span of U are annihilated by the
/// pseudoinverse and do not affect the distance.
bool region_membership(const PosteriorSummary& summary, const std::vector<double>& x, double p);

/// Decodes `count` independent standard-normal latent draws against the fixed
/// measurements; returns unscaled snapshots.
std::vector<FlowSnapshot> sample_fields(PosteriorSampler& dist, const Grid& grid, int count,
                                        std::uint64_t seed);

/// Tiles sampled fields into one numeric CSV matrix per channel (montage_u /
/// montage_v): ceil(sqrt(count)) tiles per row, each tile ny x nx. Nine
/// samples give the 3x3 arrangement.
void write_montage_csv(const std::filesystem::path& dir,
                       const std::vector<FlowSnapshot>& fields);

} // namespace flowrecon
