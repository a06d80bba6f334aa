#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowrecon {

/// Uniform rectangular grid. Convention used by the whole library:
/// i is the horizontal index in [0, nx), j the vertical index in [0, ny),
/// grid point p_k has flat index k = j*nx + i (row-major over rows j),
/// and physical coordinates (i*dx, j*dy).
struct Grid {
    int nx = 0;
    int ny = 0;
    double dx = 1.0;
    double dy = 1.0;

    Grid() = default;
    Grid(int nx_, int ny_, double dx_, double dy_) : nx(nx_), ny(ny_), dx(dx_), dy(dy_) {
        if (nx < 2 || ny < 2) {
            throw std::invalid_argument("Grid: nx and ny must be >= 2");
        }
        if (!(dx > 0.0) || !(dy > 0.0)) {
            throw std::invalid_argument("Grid: dx and dy must be > 0");
        }
    }

    int n_points() const { return nx * ny; }
    int n_state() const { return 2 * nx * ny; }
    int index(int i, int j) const { return j * nx + i; }
    double x(int i) const { return i * dx; }
    double y(int j) const { return j * dy; }

    bool operator==(const Grid& o) const {
        return nx == o.nx && ny == o.ny && dx == o.dx && dy == o.dy;
    }
};

/// One time slice of the velocity field (u, v) on a grid. u and v are stored
/// flat in the grid's row-major order and must be finite.
struct FlowSnapshot {
    Grid grid;
    std::vector<double> u;
    std::vector<double> v;
    int time_index = 0;

    FlowSnapshot() = default;
    FlowSnapshot(Grid g, std::vector<double> u_, std::vector<double> v_, int t)
        : grid(g), u(std::move(u_)), v(std::move(v_)), time_index(t) {
        const std::size_t n = static_cast<std::size_t>(grid.n_points());
        if (u.size() != n || v.size() != n) {
            throw std::invalid_argument("FlowSnapshot: u and v must have length nx*ny");
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (!std::isfinite(u[k]) || !std::isfinite(v[k])) {
                throw std::invalid_argument("FlowSnapshot: non-finite value at point " +
                                            std::to_string(k));
            }
        }
    }
};

/// Time-ordered collection of snapshots sharing one grid.
struct FlowSeries {
    Grid grid;
    std::vector<FlowSnapshot> snapshots;

    FlowSeries() = default;
    FlowSeries(Grid g, std::vector<FlowSnapshot> snaps)
        : grid(g), snapshots(std::move(snaps)) {
        if (snapshots.empty()) {
            throw std::invalid_argument("FlowSeries: needs at least one snapshot");
        }
        for (std::size_t k = 0; k < snapshots.size(); ++k) {
            if (!(snapshots[k].grid == grid)) {
                throw std::invalid_argument("FlowSeries: snapshot grid mismatch");
            }
            if (k > 0 && snapshots[k].time_index <= snapshots[k - 1].time_index) {
                throw std::invalid_argument("FlowSeries: time_index must be strictly increasing");
            }
        }
    }

    std::size_t size() const { return snapshots.size(); }
};

/// Flattens a snapshot into the state vector (u(p_1)...u(p_N), v(p_1)...v(p_N)).
inline std::vector<double> flatten_state(const FlowSnapshot& s) {
    const std::size_t n = s.u.size();
    std::vector<double> x(2 * n);
    for (std::size_t k = 0; k < n; ++k) x[k] = s.u[k];
    for (std::size_t k = 0; k < n; ++k) x[n + k] = s.v[k];
    return x;
}

/// Exact inverse of flatten_state.
inline FlowSnapshot unflatten_state(const Grid& grid, const std::vector<double>& x,
                                    int time_index) {
    const std::size_t n = static_cast<std::size_t>(grid.n_points());
    if (x.size() != 2 * n) {
        throw std::invalid_argument("unflatten_state: state length must be 2*nx*ny");
    }
    std::vector<double> u(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<double> v(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
    return FlowSnapshot(grid, std::move(u), std::move(v), time_index);
}

} // namespace flowrecon
