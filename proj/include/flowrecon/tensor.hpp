#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowrecon::nn {

/// Dense row-major tensor. Spatial tensors are (H, W, C); the trailing unit
/// dimension some frameworks carry is omitted.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
        data.assign(static_cast<std::size_t>(count(shape)), 0.0);
    }
    Tensor(std::vector<int> shape_, std::vector<double> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (data.size() != static_cast<std::size_t>(count(shape))) {
            throw std::invalid_argument("Tensor: data length does not match shape");
        }
    }

    static long long count(const std::vector<int>& shape) {
        long long n = 1;
        for (const int d : shape) {
            if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
            n *= d;
        }
        return n;
    }

    std::size_t size() const { return data.size(); }

    double& at3(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double at3(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
};

inline std::string shape_string(const std::vector<int>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

} // namespace flowrecon::nn
