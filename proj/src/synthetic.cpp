#include "flowrecon/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "flowrecon/rng.hpp"

namespace flowrecon {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct FourierMode {
    double amp;
    double kx;
    double ky;
    double phase;
    double rate; // temporal phase rate, integer multiple of phase_speed
};

std::vector<FourierMode> make_fourier_modes(const FlowRecipe& r) {
    Rng rng(derive_seed(r.seed, "fourier-modes"));
    std::vector<FourierMode> modes(8);
    for (auto& m : modes) {
        m.amp = rng.uniform(0.5, 1.5);
        m.kx = static_cast<double>(1 + rng.uniform_index(static_cast<std::uint64_t>(r.wavenumber_x)));
        m.ky = static_cast<double>(1 + rng.uniform_index(static_cast<std::uint64_t>(r.wavenumber_y)));
        m.phase = rng.uniform(0.0, kTwoPi);
        m.rate = r.phase_speed * static_cast<double>(1 + rng.uniform_index(3));
    }
    return modes;
}

} // namespace

FlowKind flow_kind_from_string(const std::string& name) {
    if (name == "taylor_green") return FlowKind::taylor_green;
    if (name == "traveling_vortices") return FlowKind::traveling_vortices;
    if (name == "random_fourier_solenoidal") return FlowKind::random_fourier_solenoidal;
    throw std::invalid_argument("unknown flow recipe kind: " + name);
}

std::string to_string(FlowKind kind) {
    switch (kind) {
        case FlowKind::taylor_green: return "taylor_green";
        case FlowKind::traveling_vortices: return "traveling_vortices";
        case FlowKind::random_fourier_solenoidal: return "random_fourier_solenoidal";
    }
    throw std::invalid_argument("unknown flow recipe kind");
}

void FlowRecipe::validate() const {
    if (!(amplitude > 0.0)) throw std::invalid_argument("FlowRecipe: amplitude must be > 0");
    if (wavenumber_x < 1 || wavenumber_y < 1) {
        throw std::invalid_argument("FlowRecipe: wavenumbers must be >= 1");
    }
}

FlowSeries generate(const FlowRecipe& recipe, const Grid& grid,
                    const std::vector<double>& times) {
    recipe.validate();
    if (times.empty()) throw std::invalid_argument("generate: times must be nonempty");

    const int n = grid.n_points();
    const double kx = static_cast<double>(recipe.wavenumber_x);
    const double ky = static_cast<double>(recipe.wavenumber_y);
    const double amp = recipe.amplitude;

    std::vector<FourierMode> modes;
    if (recipe.kind == FlowKind::random_fourier_solenoidal) {
        modes = make_fourier_modes(recipe);
    }

    std::vector<FlowSnapshot> snaps;
    snaps.reserve(times.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const double t = times[ti];
        std::vector<double> u(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
        for (int j = 0; j < grid.ny; ++j) {
            const double y = grid.y(j);
            for (int i = 0; i < grid.nx; ++i) {
                const double x = grid.x(i);
                const int k = grid.index(i, j);
                double uu = 0.0, vv = 0.0;
                switch (recipe.kind) {
                    case FlowKind::taylor_green: {
                        // psi = -(amp/ky) cos(kx x) cos(ky y) g(t)
                        const double g = std::cos(recipe.phase_speed * t);
                        uu = amp * std::cos(kx * x) * std::sin(ky * y) * g;
                        vv = -amp * (kx / ky) * std::sin(kx * x) * std::cos(ky * y) * g;
                        break;
                    }
                    case FlowKind::traveling_vortices: {
                        // Four traveling harmonics with 1/h falloff in velocity;
                        // snapshot-matrix rank stays well above the harmonic count
                        // a handful of sensors can pin down linearly.
                        for (int h = 1; h <= 4; ++h) {
                            const double hh = static_cast<double>(h);
                            const double ax = hh * kx * (x - recipe.phase_speed * t) + 0.7 * (hh - 1.0);
                            const double ay = hh * ky * y;
                            uu += -(amp * ky / hh) * std::cos(ax) * std::sin(ay);
                            vv += (amp * kx / hh) * std::sin(ax) * std::cos(ay);
                        }
                        break;
                    }
                    case FlowKind::random_fourier_solenoidal: {
                        for (const auto& m : modes) {
                            const double arg = m.kx * x + m.ky * y + m.phase + m.rate * t;
                            const double norm = std::sqrt(m.kx * m.kx + m.ky * m.ky);
                            const double s = amp * m.amp * std::sin(arg) / norm;
                            uu += -m.ky * s;
                            vv += m.kx * s;
                        }
                        break;
                    }
                }
                u[static_cast<std::size_t>(k)] = uu;
                v[static_cast<std::size_t>(k)] = vv;
            }
        }
        snaps.emplace_back(grid, std::move(u), std::move(v), static_cast<int>(ti));
    }
    return FlowSeries(grid, std::move(snaps));
}

} // namespace flowrecon
