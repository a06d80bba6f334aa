#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "flowrecon/divergence.hpp"
#include "flowrecon/grid.hpp"
#include "flowrecon/sampling.hpp"
#include "flowrecon/scaling.hpp"

namespace flowrecon {

/// Truncated POD basis of a snapshot matrix: phi holds the first r left
/// singular vectors (orthonormal columns, 2N x r, row-major), paired with the
/// nonincreasing singular values. The basis lives in the scaled space defined
/// by `scaling` (identity scaling = raw states). The reduced representation
/// A_h = phi^+ X_h of the snapshot matrix exists but is never needed by the
/// reconstruction path, so it is not stored.
struct PodBasis {
    Grid grid;
    int r = 0;
    std::vector<double> phi;             // 2N x r, row-major
    std::vector<double> singular_values; // length r, nonincreasing
    bool mean_removed = false;           // default path keeps the snapshot mean in place
    std::vector<double> mean;            // scaled-space snapshot mean; empty unless mean_removed
    ScalingParams scaling;

    int n_state() const { return grid.n_state(); }
    double phi_at(int row, int col) const { return phi[static_cast<std::size_t>(row) * r + col]; }

    /// Basis restricted to the leading r_prefix components.
    PodBasis prefix(int r_prefix) const;

    /// phi * a (plus the removed mean, when present) in the basis' scaled space.
    std::vector<double> expand(const std::vector<double>& coefficients) const;
};

/// SVD of the (scaled) snapshot matrix; r <= min(2N, K). With mean_removed
/// the column mean is subtracted first and carried in the basis.
PodBasis compute_pod(const FlowSeries& train, int r,
                     const ScalingParams& scaling = ScalingParams::identity(),
                     bool mean_removed = false);

struct GpodConfig {
    int r = 1;
    double lambda = 0.0;

    void validate() const;
};

struct GpodSolution {
    std::vector<double> coefficients;  // a*, length r
    std::vector<double> reconstruction; // phi * a*, in the basis' scaled space
    bool rank_deficient = false;       // least-norm fallback was taken

    /// Reconstruction mapped back to raw (unscaled) units.
    std::vector<double> unscaled(const PodBasis& basis) const {
        return unscale_state(basis.scaling, reconstruction);
    }
};

/// Minimizes ||C Phi a - m||^2 + lambda ||L_div Phi a||^2 over coefficients a
/// via the r x r normal equations, with a least-norm fallback on rank
/// deficiency. The measurement vector m is given in raw units and scaled
/// internally; the divergence penalty is applied with the scaling weights so
/// it penalizes the physical divergence of the reconstructed field.
GpodSolution gpod_reconstruct(const PodBasis& basis, const SamplingOperator& op,
                              const DivergenceOperator& div, const std::vector<double>& m,
                              const GpodConfig& cfg);

/// Validation-set grid search over (r, lambda); minimizes the mean relative
/// error of the unscaled reconstructions. Ties break toward smaller r, then
/// smaller lambda.
GpodConfig select_gpod_hyperparams(const PodBasis& basis_family, const FlowSeries& validation,
                                   const SamplingOperator& op, const DivergenceOperator& div,
                                   const std::vector<int>& r_grid,
                                   const std::vector<double>& lambda_grid);

/// Basis container "frcbasis-1": JSON header line + little-endian f64 blob.
void save_pod_basis(const std::filesystem::path& file, const PodBasis& basis);
PodBasis load_pod_basis(const std::filesystem::path& file);

} // namespace flowrecon
