#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "flowrecon/grid.hpp"

namespace flowrecon {

/// Per-channel min-max scaling parameters computed from training data:
/// center = (max+min)/2, halfwidth = (max-min)/2. A constant channel gets
/// halfwidth 1 so the transform stays invertible.
struct ScalingParams {
    double u_center = 0.0;
    double v_center = 0.0;
    double u_halfwidth = 1.0;
    double v_halfwidth = 1.0;

    static ScalingParams identity() { return ScalingParams{}; }

    bool is_identity() const {
        return u_center == 0.0 && v_center == 0.0 && u_halfwidth == 1.0 && v_halfwidth == 1.0;
    }
};

inline ScalingParams compute_scaling(const FlowSeries& train) {
    double u_min = train.snapshots[0].u[0], u_max = u_min;
    double v_min = train.snapshots[0].v[0], v_max = v_min;
    for (const auto& s : train.snapshots) {
        for (const double val : s.u) {
            u_min = std::min(u_min, val);
            u_max = std::max(u_max, val);
        }
        for (const double val : s.v) {
            v_min = std::min(v_min, val);
            v_max = std::max(v_max, val);
        }
    }
    ScalingParams p;
    p.u_center = 0.5 * (u_max + u_min);
    p.v_center = 0.5 * (v_max + v_min);
    p.u_halfwidth = u_max > u_min ? 0.5 * (u_max - u_min) : 1.0;
    p.v_halfwidth = v_max > v_min ? 0.5 * (v_max - v_min) : 1.0;
    return p;
}

inline FlowSnapshot scale(const ScalingParams& p, const FlowSnapshot& s) {
    std::vector<double> u(s.u.size()), v(s.v.size());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = (s.u[k] - p.u_center) / p.u_halfwidth;
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (s.v[k] - p.v_center) / p.v_halfwidth;
    return FlowSnapshot(s.grid, std::move(u), std::move(v), s.time_index);
}

inline FlowSnapshot unscale(const ScalingParams& p, const FlowSnapshot& s) {
    std::vector<double> u(s.u.size()), v(s.v.size());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = p.u_halfwidth * s.u[k] + p.u_center;
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = p.v_halfwidth * s.v[k] + p.v_center;
    return FlowSnapshot(s.grid, std::move(u), std::move(v), s.time_index);
}

inline FlowSeries scale(const ScalingParams& p, const FlowSeries& series) {
    std::vector<FlowSnapshot> out;
    out.reserve(series.size());
    for (const auto& s : series.snapshots) out.push_back(scale(p, s));
    return FlowSeries(series.grid, std::move(out));
}

/// Scaled <-> raw on flat state vectors (u block then v block).
inline std::vector<double> scale_state(const ScalingParams& p, const std::vector<double>& x) {
    const std::size_t n = x.size() / 2;
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < n; ++k) out[k] = (x[k] - p.u_center) / p.u_halfwidth;
    for (std::size_t k = n; k < x.size(); ++k) out[k] = (x[k] - p.v_center) / p.v_halfwidth;
    return out;
}

inline std::vector<double> unscale_state(const ScalingParams& p, const std::vector<double>& x) {
    const std::size_t n = x.size() / 2;
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < n; ++k) out[k] = p.u_halfwidth * x[k] + p.u_center;
    for (std::size_t k = n; k < x.size(); ++k) out[k] = p.v_halfwidth * x[k] + p.v_center;
    return out;
}

/// Measurement vector (u block then v block of sensor values) scaled per channel.
inline std::vector<double> scale_measurements(const ScalingParams& p,
                                              const std::vector<double>& m) {
    if (m.size() % 2 != 0) {
        throw std::invalid_argument("scale_measurements: measurement length must be even");
    }
    const std::size_t half = m.size() / 2;
    std::vector<double> out(m.size());
    for (std::size_t k = 0; k < half; ++k) out[k] = (m[k] - p.u_center) / p.u_halfwidth;
    for (std::size_t k = half; k < m.size(); ++k) out[k] = (m[k] - p.v_center) / p.v_halfwidth;
    return out;
}

} // namespace flowrecon
