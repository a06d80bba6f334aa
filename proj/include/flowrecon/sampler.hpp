#pragma once

#include <vector>

namespace flowrecon {

/// Handle for a distribution over full states: draw(eps) maps a standard
/// normal latent vector deterministically to one state sample.
class PosteriorSampler {
public:
    virtual ~PosteriorSampler() = default;
    virtual int state_dim() const = 0;
    virtual int latent_dim() const = 0;
    virtual std::vector<double> draw(const std::vector<double>& eps) = 0;
};

} // namespace flowrecon
