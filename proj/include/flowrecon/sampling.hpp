#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowrecon/grid.hpp"

namespace flowrecon {

/// Ordered set of M distinct sensor positions (i, j) on a grid.
struct SensorLayout {
    std::vector<std::pair<int, int>> locations;

    SensorLayout() = default;
    explicit SensorLayout(std::vector<std::pair<int, int>> locs) : locations(std::move(locs)) {
        if (locations.empty()) {
            throw std::invalid_argument("SensorLayout: needs at least one location");
        }
        std::set<std::pair<int, int>> seen;
        for (const auto& [i, j] : locations) {
            if (i < 0 || j < 0) {
                throw std::invalid_argument("SensorLayout: negative coordinate");
            }
            if (!seen.insert({i, j}).second) {
                throw std::invalid_argument("SensorLayout: duplicate location (" +
                                            std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }

    int size() const { return static_cast<int>(locations.size()); }
};

/// Acts as the 2M x 2N two-block selection matrix C: rows 0..M-1 pick u at the
/// sensor points, rows M..2M-1 pick v at the same points. The matrix is never
/// materialized; apply() reads the selected state entries directly.
class SamplingOperator {
public:
    SamplingOperator(SensorLayout layout, const Grid& grid)
        : layout_(std::move(layout)), grid_(grid) {
        point_indices_.reserve(layout_.locations.size());
        for (const auto& [i, j] : layout_.locations) {
            if (i >= grid.nx || j >= grid.ny) {
                throw std::invalid_argument("SamplingOperator: location (" + std::to_string(i) +
                                            "," + std::to_string(j) + ") outside grid bounds");
            }
            point_indices_.push_back(grid.index(i, j));
        }
    }

    const SensorLayout& layout() const { return layout_; }
    const Grid& grid() const { return grid_; }
    int n_sensors() const { return static_cast<int>(point_indices_.size()); }
    int n_measurements() const { return 2 * n_sensors(); }
    int n_state() const { return grid_.n_state(); }

    /// Row k of C has its single 1 at this state index.
    int state_index(int row) const {
        const int m = n_sensors();
        return row < m ? point_indices_[row] : grid_.n_points() + point_indices_[row - m];
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != n_state()) {
            throw std::invalid_argument("SamplingOperator::apply: state length mismatch");
        }
        const int m2 = n_measurements();
        std::vector<double> out(static_cast<std::size_t>(m2));
        for (int k = 0; k < m2; ++k) out[static_cast<std::size_t>(k)] = x[state_index(k)];
        return out;
    }

private:
    SensorLayout layout_;
    Grid grid_;
    std::vector<int> point_indices_;
};

} // namespace flowrecon
