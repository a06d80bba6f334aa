#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "flowrecon/layers.hpp"

namespace flowrecon::nn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. step() consumes the accumulated gradients and
/// zeroes them afterwards.
class AdamState {
public:
    AdamState(const ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
        m_.reserve(store.size());
        v_.reserve(store.size());
        for (std::size_t i = 0; i < store.size(); ++i) {
            m_.emplace_back(store.at(i).value.size(), 0.0);
            v_.emplace_back(store.at(i).value.size(), 0.0);
        }
    }

    long long step_count() const { return step_; }

    void step(ParamStore& store) {
        if (store.size() != m_.size()) {
            throw std::invalid_argument("AdamState::step: store size changed");
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t p = 0; p < store.size(); ++p) {
            Param& param = store.at(p);
            std::vector<double>& m = m_[p];
            std::vector<double>& v = v_[p];
            for (std::size_t i = 0; i < param.value.size(); ++i) {
                const double g = param.grad.data[i];
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                const double m_hat = m[i] / bc1;
                const double v_hat = v[i] / bc2;
                param.value.data[i] -= cfg_.learning_rate * m_hat /
                                       (std::sqrt(v_hat) + cfg_.epsilon);
            }
        }
        store.zero_grads();
    }

private:
    AdamConfig cfg_;
    long long step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

} // namespace flowrecon::nn
