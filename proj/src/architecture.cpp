#include "flowrecon/architecture.hpp"

#include <stdexcept>

namespace flowrecon {

using nlohmann::json;
using nn::LayerSpec;

namespace {

LayerSpec dense(int units) {
    LayerSpec s;
    s.kind = "dense";
    s.units = units;
    return s;
}
LayerSpec conv(int filters, int kernel = 2, int stride = 2) {
    LayerSpec s;
    s.kind = "conv2d";
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}
LayerSpec conv_t(int filters, int kernel = 2, int stride = 2) {
    LayerSpec s;
    s.kind = "conv2d_transpose";
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}
LayerSpec relu() {
    LayerSpec s;
    s.kind = "relu";
    return s;
}
LayerSpec linear() {
    LayerSpec s;
    s.kind = "linear";
    return s;
}
LayerSpec zero_pad(int pad_h, int pad_w) {
    LayerSpec s;
    s.kind = "zero_pad";
    s.pad_h = pad_h;
    s.pad_w = pad_w;
    return s;
}
LayerSpec crop(int crop_h, int crop_w) {
    LayerSpec s;
    s.kind = "crop";
    s.crop_h = crop_h;
    s.crop_w = crop_w;
    return s;
}
LayerSpec flatten() {
    LayerSpec s;
    s.kind = "flatten";
    return s;
}
LayerSpec reshape(std::vector<int> shape) {
    LayerSpec s;
    s.kind = "reshape";
    s.shape = std::move(shape);
    return s;
}
LayerSpec concat(int aux_width) {
    LayerSpec s;
    s.kind = "concat";
    s.aux_width = aux_width;
    return s;
}

void check_measurements(int n_measurements) {
    if (n_measurements < 2 || n_measurements % 2 != 0) {
        throw std::invalid_argument("ScvaeArchitecture: n_measurements must be even and >= 2");
    }
}

} // namespace

json ScvaeArchitecture::to_json() const {
    json j;
    j["input_shape"] = input_shape;
    j["latent_dim"] = latent_dim;
    j["n_measurements"] = n_measurements;
    j["encoder"] = json::array();
    for (const auto& s : encoder) j["encoder"].push_back(s.to_json());
    j["decoder"] = json::array();
    for (const auto& s : decoder) j["decoder"].push_back(s.to_json());
    return j;
}

ScvaeArchitecture ScvaeArchitecture::from_json(const json& j) {
    ScvaeArchitecture a;
    a.input_shape = j.at("input_shape").get<std::vector<int>>();
    a.latent_dim = j.at("latent_dim").get<int>();
    a.n_measurements = j.at("n_measurements").get<int>();
    for (const auto& s : j.at("encoder")) a.encoder.push_back(LayerSpec::from_json(s));
    for (const auto& s : j.at("decoder")) a.decoder.push_back(LayerSpec::from_json(s));
    if (a.latent_dim < 1) throw std::invalid_argument("ScvaeArchitecture: latent_dim must be >= 1");
    return a;
}

ScvaeArchitecture ScvaeArchitecture::cylinder(const Grid& grid, int n_measurements) {
    check_measurements(n_measurements);
    if (grid.nx != 160 || grid.ny != 50) {
        throw std::invalid_argument("ScvaeArchitecture::cylinder expects a 160x50 grid");
    }
    ScvaeArchitecture a;
    a.input_shape = {50, 160, 2};
    a.latent_dim = 2;
    a.n_measurements = n_measurements;
    a.encoder = {zero_pad(3, 4), conv(160), relu(), conv(200), relu(), flatten(), dense(64),
                 relu()};
    a.decoder = {concat(n_measurements), dense(14 * 42 * 200), relu(), reshape({14, 42, 200}),
                 conv_t(200), relu(), conv_t(160), relu(), conv_t(2, 1, 1), linear(),
                 crop(3, 4)};
    return a;
}

ScvaeArchitecture ScvaeArchitecture::ocean(const Grid& grid, int n_measurements) {
    check_measurements(n_measurements);
    if (grid.nx != 32 || grid.ny != 32) {
        throw std::invalid_argument("ScvaeArchitecture::ocean expects a 32x32 grid");
    }
    ScvaeArchitecture a;
    a.input_shape = {32, 32, 2};
    a.latent_dim = 2;
    a.n_measurements = n_measurements;
    a.encoder = {conv(64), relu(), conv(128), relu(), flatten(), dense(16), relu()};
    a.decoder = {concat(n_measurements), dense(8 * 8 * 128), relu(), reshape({8, 8, 128}),
                 conv_t(64), relu(), conv_t(128), relu(), conv_t(2, 1, 1), linear()};
    return a;
}

ScvaeArchitecture ScvaeArchitecture::conv_small(const Grid& grid, int n_measurements, int c1,
                                                int c2, int bottleneck) {
    check_measurements(n_measurements);
    if (grid.nx % 4 != 0 || grid.ny % 4 != 0) {
        throw std::invalid_argument("ScvaeArchitecture::conv_small needs nx, ny divisible by 4");
    }
    const int h4 = grid.ny / 4, w4 = grid.nx / 4;
    ScvaeArchitecture a;
    a.input_shape = {grid.ny, grid.nx, 2};
    a.latent_dim = 2;
    a.n_measurements = n_measurements;
    a.encoder = {conv(c1), relu(), conv(c2), relu(), flatten(), dense(bottleneck), relu()};
    a.decoder = {concat(n_measurements), dense(64), relu(), dense(h4 * w4 * c2), relu(),
                 reshape({h4, w4, c2}), conv_t(c1), relu(), conv_t(2), linear()};
    return a;
}

ScvaeArchitecture ScvaeArchitecture::mlp(const Grid& grid, int n_measurements, int hidden,
                                         int bottleneck) {
    check_measurements(n_measurements);
    ScvaeArchitecture a;
    a.input_shape = {grid.ny, grid.nx, 2};
    a.latent_dim = 2;
    a.n_measurements = n_measurements;
    a.encoder = {flatten(), dense(hidden), relu(), dense(bottleneck), relu()};
    a.decoder = {concat(n_measurements), dense(hidden), relu(), dense(grid.n_state()), linear(),
                 reshape({grid.ny, grid.nx, 2})};
    return a;
}

} // namespace flowrecon
