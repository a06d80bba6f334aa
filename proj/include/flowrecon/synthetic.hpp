#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowrecon/grid.hpp"

namespace flowrecon {

enum class FlowKind { taylor_green, traveling_vortices, random_fourier_solenoidal };

FlowKind flow_kind_from_string(const std::string& name);
std::string to_string(FlowKind kind);

/// Analytic divergence-free field generators. Every kind is built from a
/// stream function psi, with u = dpsi/dy and v = -dpsi/dx evaluated
/// analytically, so the continuous divergence is identically zero.
struct FlowRecipe {
    FlowKind kind = FlowKind::taylor_green;
    double amplitude = 1.0;
    int wavenumber_x = 1;
    int wavenumber_y = 1;
    double phase_speed = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

FlowSeries generate(const FlowRecipe& recipe, const Grid& grid, const std::vector<double>& times);

} // namespace flowrecon
