#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "flowrecon/divergence.hpp"

namespace flowrecon {

inline double l2_norm(const std::vector<double>& x) {
    double s = 0.0;
    for (const double v : x) s += v * v;
    return std::sqrt(s);
}

/// Mean relative L2 error (1/n) sum ||x_hat - x|| / ||x|| over state vectors.
inline double relative_error(const std::vector<std::vector<double>>& predictions,
                             const std::vector<std::vector<double>>& truths) {
    if (predictions.empty() || predictions.size() != truths.size()) {
        throw std::invalid_argument("relative_error: need equal-length nonempty lists");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (predictions[i].size() != truths[i].size()) {
            throw std::invalid_argument("relative_error: state length mismatch");
        }
        const double denom = l2_norm(truths[i]);
        if (denom == 0.0) {
            throw std::invalid_argument("relative_error: zero-norm truth");
        }
        double diff = 0.0;
        for (std::size_t k = 0; k < truths[i].size(); ++k) {
            const double d = predictions[i][k] - truths[i][k];
            diff += d * d;
        }
        total += std::sqrt(diff) / denom;
    }
    return total / static_cast<double>(truths.size());
}

/// Mean L2 norm of the discrete divergence of predicted states.
inline double divergence_error(const std::vector<std::vector<double>>& predictions,
                               const DivergenceOperator& div) {
    if (predictions.empty()) {
        throw std::invalid_argument("divergence_error: empty prediction list");
    }
    double total = 0.0;
    for (const auto& x : predictions) {
        total += l2_norm(div.apply(x));
    }
    return total / static_cast<double>(predictions.size());
}

} // namespace flowrecon
