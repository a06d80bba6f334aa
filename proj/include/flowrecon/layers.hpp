#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowrecon/rng.hpp"
#include "flowrecon/tensor.hpp"

namespace flowrecon::nn {

/// Named parameter with its gradient accumulator. Gradients accumulate across
/// backward calls until the optimizer consumes them.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Registry of raw parameter pointers owned by layers.
class ParamStore {
public:
    void add(Param* p) { params_.push_back(p); }
    std::size_t size() const { return params_.size(); }
    Param& at(std::size_t i) { return *params_[i]; }
    const Param& at(std::size_t i) const { return *params_[i]; }

    void zero_grads() {
        for (Param* p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
    }
    void scale_grads(double f) {
        for (Param* p : params_)
            for (double& g : p->grad.data) g *= f;
    }
    std::size_t total_values() const {
        std::size_t n = 0;
        for (const Param* p : params_) n += p->value.size();
        return n;
    }
    std::vector<double> snapshot_values() const {
        std::vector<double> out;
        out.reserve(total_values());
        for (const Param* p : params_) out.insert(out.end(), p->value.data.begin(),
                                                  p->value.data.end());
        return out;
    }
    void restore_values(const std::vector<double>& flat) {
        std::size_t offset = 0;
        for (Param* p : params_) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                      flat.begin() + static_cast<std::ptrdiff_t>(offset + p->value.size()),
                      p->value.data.begin());
            offset += p->value.size();
        }
    }

private:
    std::vector<Param*> params_;
};

/// Declarative layer description; the JSON form of an architecture is a list
/// of these.
struct LayerSpec {
    std::string kind; // dense | conv2d | conv2d_transpose | relu | linear |
                      // zero_pad | crop | flatten | reshape | concat
    int units = 0;          // dense
    int filters = 0;        // conv2d / conv2d_transpose
    int kernel = 2;         // conv2d / conv2d_transpose
    int stride = 2;         // conv2d / conv2d_transpose
    int pad_h = 0, pad_w = 0;   // zero_pad (per side)
    int crop_h = 0, crop_w = 0; // crop (per side)
    std::vector<int> shape;     // reshape target
    int aux_width = 0;          // concat: width of the side input

    nlohmann::json to_json() const;
    static LayerSpec from_json(const nlohmann::json& j);
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual const LayerSpec& spec() const = 0;
    /// Validates the input shape, allocates parameters, returns output shape.
    virtual std::vector<int> build(const std::vector<int>& in_shape, Rng& rng) = 0;
    virtual Tensor forward(const Tensor& in, bool record) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void register_params(ParamStore&, const std::string&) {}
    /// Side input for concat layers; ignored elsewhere.
    virtual void set_aux(const std::vector<double>&) {}
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, int index);

/// Sequential stack of layers sharing one tape.
class Network {
public:
    void add(const LayerSpec& spec);
    /// Builds all layers; throws naming the offending layer on shape errors.
    std::vector<int> build(const std::vector<int>& input_shape, Rng& rng);

    Tensor forward(const Tensor& in, bool record = false);
    Tensor backward(const Tensor& grad_out);
    void register_params(ParamStore& store, const std::string& prefix);
    void set_aux(const std::vector<double>& aux);

    const std::vector<int>& input_shape() const { return input_shape_; }
    const std::vector<int>& output_shape() const { return output_shape_; }
    std::vector<LayerSpec> specs() const;
    bool built() const { return built_; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<int> input_shape_;
    std::vector<int> output_shape_;
    bool built_ = false;
};

} // namespace flowrecon::nn
