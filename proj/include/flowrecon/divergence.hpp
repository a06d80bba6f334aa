#pragma once

#include <stdexcept>
#include <vector>

#include "flowrecon/grid.hpp"

namespace flowrecon {

/// Discrete divergence: a linear map from the 2N state vector to the N values
/// du/dx + dv/dy at the grid points. Second-order central differences on
/// interior points, second-order one-sided stencils on boundaries. The
/// one-sided stencil is evaluated in difference form, 4(f1-f0) - (f2-f0),
/// so constant fields map to exactly zero and affine fields are exact.
class DivergenceOperator {
public:
    explicit DivergenceOperator(const Grid& grid) : grid_(grid) {
        if (grid.nx < 3 || grid.ny < 3) {
            throw std::invalid_argument("DivergenceOperator: grid must be at least 3x3");
        }
    }

    const Grid& grid() const { return grid_; }

    std::vector<double> apply(const std::vector<double>& x) const {
        return apply_weighted(x, 1.0, 1.0);
    }

    /// Divergence with per-channel weights: wu * du/dx + wv * dv/dy.
    /// With wu = u_halfwidth and wv = v_halfwidth this maps a min-max scaled
    /// state to the physical divergence of the underlying unscaled field.
    std::vector<double> apply_weighted(const std::vector<double>& x, double wu,
                                       double wv) const {
        const int nx = grid_.nx, ny = grid_.ny, n = grid_.n_points();
        if (static_cast<int>(x.size()) != 2 * n) {
            throw std::invalid_argument("DivergenceOperator::apply: state length mismatch");
        }
        const double cx = wu / (2.0 * grid_.dx);
        const double cy = wv / (2.0 * grid_.dy);
        const double* u = x.data();
        const double* v = x.data() + n;
        std::vector<double> out(static_cast<std::size_t>(n));
        for (int j = 0; j < ny; ++j) {
            const int row = j * nx;
            for (int i = 0; i < nx; ++i) {
                const int k = row + i;
                double dudx;
                if (i == 0) {
                    dudx = 4.0 * (u[k + 1] - u[k]) - (u[k + 2] - u[k]);
                } else if (i == nx - 1) {
                    dudx = -(4.0 * (u[k - 1] - u[k]) - (u[k - 2] - u[k]));
                } else {
                    dudx = u[k + 1] - u[k - 1];
                }
                double dvdy;
                if (j == 0) {
                    dvdy = 4.0 * (v[k + nx] - v[k]) - (v[k + 2 * nx] - v[k]);
                } else if (j == ny - 1) {
                    dvdy = -(4.0 * (v[k - nx] - v[k]) - (v[k - 2 * nx] - v[k]));
                } else {
                    dvdy = v[k + nx] - v[k - nx];
                }
                out[static_cast<std::size_t>(k)] = cx * dudx + cy * dvdy;
            }
        }
        return out;
    }

    /// Transpose action: maps a length-N vector g to L^T g of length 2N.
    /// Needed by gradient computations of ||L x||^2 penalties.
    std::vector<double> apply_weighted_adjoint(const std::vector<double>& g, double wu,
                                               double wv) const {
        const int nx = grid_.nx, ny = grid_.ny, n = grid_.n_points();
        if (static_cast<int>(g.size()) != n) {
            throw std::invalid_argument("DivergenceOperator::adjoint: length mismatch");
        }
        const double cx = wu / (2.0 * grid_.dx);
        const double cy = wv / (2.0 * grid_.dy);
        std::vector<double> out(static_cast<std::size_t>(2 * n), 0.0);
        double* du = out.data();
        double* dv = out.data() + n;
        for (int j = 0; j < ny; ++j) {
            const int row = j * nx;
            for (int i = 0; i < nx; ++i) {
                const int k = row + i;
                const double gx = cx * g[static_cast<std::size_t>(k)];
                if (i == 0) {
                    du[k] -= 3.0 * gx;
                    du[k + 1] += 4.0 * gx;
                    du[k + 2] -= gx;
                } else if (i == nx - 1) {
                    du[k] += 3.0 * gx;
                    du[k - 1] -= 4.0 * gx;
                    du[k - 2] += gx;
                } else {
                    du[k + 1] += gx;
                    du[k - 1] -= gx;
                }
                const double gy = cy * g[static_cast<std::size_t>(k)];
                if (j == 0) {
                    dv[k] -= 3.0 * gy;
                    dv[k + nx] += 4.0 * gy;
                    dv[k + 2 * nx] -= gy;
                } else if (j == ny - 1) {
                    dv[k] += 3.0 * gy;
                    dv[k - nx] -= 4.0 * gy;
                    dv[k - 2 * nx] += gy;
                } else {
                    dv[k + nx] += gy;
                    dv[k - nx] -= gy;
                }
            }
        }
        return out;
    }

private:
    Grid grid_;
};

} // namespace flowrecon
