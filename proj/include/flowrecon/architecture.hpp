#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "flowrecon/grid.hpp"
#include "flowrecon/layers.hpp"

namespace flowrecon {

/// Declarative SCVAE architecture. The encoder trunk consumes the scaled
/// snapshot tensor (H, W, 2) and is followed by two parallel dense heads of
/// width latent_dim (mean and log-variance); the heads are implied, not
/// listed. The decoder sequence starts from the latent vector; its leading
/// concat layer appends the flattened measurements, so the decoder is the
/// only part that sees them. Decoder output must be snapshot-shaped.
struct ScvaeArchitecture {
    std::vector<int> input_shape; // (H=ny, W=nx, 2)
    int latent_dim = 2;
    int n_measurements = 0; // 2M
    std::vector<nn::LayerSpec> encoder;
    std::vector<nn::LayerSpec> decoder;

    nlohmann::json to_json() const;
    static ScvaeArchitecture from_json(const nlohmann::json& j);

    /// 160x50 wake layout: zero-pad (4,3), stride-2 kernel-2 convs with 160
    /// and 200 filters, 64-unit bottleneck; mirrored transposed-conv decoder
    /// with a final linear 1x1 stage and crop.
    static ScvaeArchitecture cylinder(const Grid& grid, int n_measurements);

    /// 32x32 current layout: stride-2 kernel-2 convs with 64 and 128 filters,
    /// 16-unit bottleneck; transposed-conv decoder (64 then 128 filters) with
    /// a final linear 1x1 stage.
    static ScvaeArchitecture ocean(const Grid& grid, int n_measurements);

    /// Reduced conv architecture in the same pattern for grids divisible by 4;
    /// sized for CPU training.
    static ScvaeArchitecture conv_small(const Grid& grid, int n_measurements, int c1 = 24,
                                        int c2 = 48, int bottleneck = 32);

    /// Dense-only architecture for very fast experiments.
    static ScvaeArchitecture mlp(const Grid& grid, int n_measurements, int hidden = 64,
                                 int bottleneck = 16);
};

} // namespace flowrecon
