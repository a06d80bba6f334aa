#include "flowrecon/layers.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace flowrecon::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

namespace {

[[noreturn]] void layer_error(const std::string& where, const std::string& what) {
    throw std::invalid_argument(where + ": " + what);
}

std::string layer_tag(const LayerSpec& spec, int index) {
    return spec.kind + " (layer " + std::to_string(index) + ")";
}

void glorot_fill(Tensor& t, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
}

class LayerBase : public Layer {
public:
    LayerBase(LayerSpec spec, int index) : spec_(std::move(spec)), tag_(layer_tag(spec_, index)) {}
    const LayerSpec& spec() const override { return spec_; }

protected:
    void require_cache() const {
        if (!has_cache_) throw std::runtime_error(tag_ + ": stale tape (backward without forward)");
    }
    LayerSpec spec_;
    std::string tag_;
    bool has_cache_ = false;
};

// ---------------------------------------------------------------------------

class DenseLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;

    std::vector<int> build(const std::vector<int>& in, Rng& rng) override {
        if (in.size() != 1) layer_error(tag_, "expects a flat input, got " + shape_string(in));
        if (spec_.units < 1) layer_error(tag_, "units must be >= 1");
        in_dim_ = in[0];
        weight_.name = "w";
        weight_.value = Tensor({spec_.units, in_dim_});
        weight_.grad = Tensor({spec_.units, in_dim_});
        bias_.name = "b";
        bias_.value = Tensor({spec_.units});
        bias_.grad = Tensor({spec_.units});
        glorot_fill(weight_.value, in_dim_, spec_.units, rng);
        return {spec_.units};
    }

    Tensor forward(const Tensor& in, bool record) override {
        if (static_cast<int>(in.size()) != in_dim_) {
            layer_error(tag_, "input shape " + shape_string(in.shape) + " does not match build");
        }
        Tensor out({spec_.units});
        MapConst w(weight_.value.data.data(), spec_.units, in_dim_);
        Eigen::Map<const Eigen::VectorXd> x(in.data.data(), in_dim_);
        Eigen::Map<Eigen::VectorXd> y(out.data.data(), spec_.units);
        y.noalias() = w * x;
        for (int u = 0; u < spec_.units; ++u) out.data[u] += bias_.value.data[u];
        if (record) {
            cached_input_ = in;
            has_cache_ = true;
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        MapConst w(weight_.value.data.data(), spec_.units, in_dim_);
        Eigen::Map<const Eigen::VectorXd> g(grad_out.data.data(), spec_.units);
        Eigen::Map<const Eigen::VectorXd> x(cached_input_.data.data(), in_dim_);
        MapMat gw(weight_.grad.data.data(), spec_.units, in_dim_);
        gw.noalias() += g * x.transpose();
        for (int u = 0; u < spec_.units; ++u) bias_.grad.data[u] += grad_out.data[u];
        Tensor gin({in_dim_});
        Eigen::Map<Eigen::VectorXd> gx(gin.data.data(), in_dim_);
        gx.noalias() = w.transpose() * g;
        return gin;
    }

    void register_params(ParamStore& store, const std::string& prefix) override {
        weight_.name = prefix + ".w";
        bias_.name = prefix + ".b";
        store.add(&weight_);
        store.add(&bias_);
    }

private:
    int in_dim_ = 0;
    Param weight_, bias_;
    Tensor cached_input_;
};

// ---------------------------------------------------------------------------

/// Valid-padding convolution; explicit zero_pad layers provide any padding.
/// Kernel stored (k, k, C_in, F); forward is im2col followed by one GEMM.
class Conv2dLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;

    std::vector<int> build(const std::vector<int>& in, Rng& rng) override {
        if (in.size() != 3) layer_error(tag_, "expects (H,W,C) input, got " + shape_string(in));
        h_ = in[0];
        w_ = in[1];
        c_ = in[2];
        k_ = spec_.kernel;
        s_ = spec_.stride;
        f_ = spec_.filters;
        if (k_ < 1 || s_ < 1 || f_ < 1) layer_error(tag_, "kernel, stride, filters must be >= 1");
        if (h_ < k_ || w_ < k_ || (h_ - k_) % s_ != 0 || (w_ - k_) % s_ != 0) {
            layer_error(tag_, "input " + shape_string(in) + " incompatible with kernel " +
                                  std::to_string(k_) + " stride " + std::to_string(s_));
        }
        oh_ = (h_ - k_) / s_ + 1;
        ow_ = (w_ - k_) / s_ + 1;
        kernel_.name = "k";
        kernel_.value = Tensor({k_, k_, c_, f_});
        kernel_.grad = Tensor({k_, k_, c_, f_});
        bias_.name = "b";
        bias_.value = Tensor({f_});
        bias_.grad = Tensor({f_});
        glorot_fill(kernel_.value, k_ * k_ * c_, k_ * k_ * f_, rng);
        return {oh_, ow_, f_};
    }

    Tensor forward(const Tensor& in, bool record) override {
        if (in.shape != std::vector<int>{h_, w_, c_}) {
            layer_error(tag_, "input shape " + shape_string(in.shape) + " does not match build");
        }
        const int rows = oh_ * ow_;
        const int cols = k_ * k_ * c_;
        std::vector<double> patches(static_cast<std::size_t>(rows) * cols);
        im2col(in.data.data(), patches.data());

        Tensor out({oh_, ow_, f_});
        MapConst p(patches.data(), rows, cols);
        MapConst km(kernel_.value.data.data(), cols, f_);
        MapMat y(out.data.data(), rows, f_);
        y.noalias() = p * km;
        for (int r = 0; r < rows; ++r)
            for (int f = 0; f < f_; ++f) out.data[static_cast<std::size_t>(r) * f_ + f] +=
                bias_.value.data[static_cast<std::size_t>(f)];
        if (record) {
            cached_patches_ = std::move(patches);
            has_cache_ = true;
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        const int rows = oh_ * ow_;
        const int cols = k_ * k_ * c_;
        MapConst g(grad_out.data.data(), rows, f_);
        MapConst p(cached_patches_.data(), rows, cols);
        MapMat gk(kernel_.grad.data.data(), cols, f_);
        gk.noalias() += p.transpose() * g;
        for (int r = 0; r < rows; ++r)
            for (int f = 0; f < f_; ++f) bias_.grad.data[static_cast<std::size_t>(f)] +=
                grad_out.data[static_cast<std::size_t>(r) * f_ + f];

        std::vector<double> gpatches(static_cast<std::size_t>(rows) * cols);
        MapMat gp(gpatches.data(), rows, cols);
        MapConst km(kernel_.value.data.data(), cols, f_);
        gp.noalias() = g * km.transpose();

        Tensor gin({h_, w_, c_});
        col2im_add(gpatches.data(), gin.data.data());
        return gin;
    }

    void register_params(ParamStore& store, const std::string& prefix) override {
        kernel_.name = prefix + ".k";
        bias_.name = prefix + ".b";
        store.add(&kernel_);
        store.add(&bias_);
    }

private:
    void im2col(const double* in, double* patches) const {
        const int cols = k_ * k_ * c_;
        for (int oh = 0; oh < oh_; ++oh) {
            for (int ow = 0; ow < ow_; ++ow) {
                double* row = patches + (static_cast<std::size_t>(oh) * ow_ + ow) * cols;
                for (int kh = 0; kh < k_; ++kh) {
                    const double* src = in + ((static_cast<std::size_t>(oh * s_ + kh) * w_) +
                                              ow * s_) * c_;
                    std::copy(src, src + static_cast<std::size_t>(k_) * c_,
                              row + static_cast<std::size_t>(kh) * k_ * c_);
                }
            }
        }
    }

    void col2im_add(const double* patches, double* out) const {
        const int cols = k_ * k_ * c_;
        for (int oh = 0; oh < oh_; ++oh) {
            for (int ow = 0; ow < ow_; ++ow) {
                const double* row = patches + (static_cast<std::size_t>(oh) * ow_ + ow) * cols;
                for (int kh = 0; kh < k_; ++kh) {
                    double* dst = out + ((static_cast<std::size_t>(oh * s_ + kh) * w_) +
                                         ow * s_) * c_;
                    const double* src = row + static_cast<std::size_t>(kh) * k_ * c_;
                    for (int t = 0; t < k_ * c_; ++t) dst[t] += src[t];
                }
            }
        }
    }

    int h_ = 0, w_ = 0, c_ = 0, k_ = 0, s_ = 0, f_ = 0, oh_ = 0, ow_ = 0;
    Param kernel_, bias_;
    std::vector<double> cached_patches_;
};

// ---------------------------------------------------------------------------

/// Adjoint of the valid convolution with the same kernel and stride:
/// (H,W,C) -> ((H-1)s+k, (W-1)s+k, F). Kernel stored (C, k, k, F) so the
/// forward pass is one GEMM followed by a scatter-add.
class ConvTranspose2dLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;

    std::vector<int> build(const std::vector<int>& in, Rng& rng) override {
        if (in.size() != 3) layer_error(tag_, "expects (H,W,C) input, got " + shape_string(in));
        h_ = in[0];
        w_ = in[1];
        c_ = in[2];
        k_ = spec_.kernel;
        s_ = spec_.stride;
        f_ = spec_.filters;
        if (k_ < 1 || s_ < 1 || f_ < 1) layer_error(tag_, "kernel, stride, filters must be >= 1");
        oh_ = (h_ - 1) * s_ + k_;
        ow_ = (w_ - 1) * s_ + k_;
        kernel_.name = "k";
        kernel_.value = Tensor({c_, k_, k_, f_});
        kernel_.grad = Tensor({c_, k_, k_, f_});
        bias_.name = "b";
        bias_.value = Tensor({f_});
        bias_.grad = Tensor({f_});
        glorot_fill(kernel_.value, k_ * k_ * c_, k_ * k_ * f_, rng);
        return {oh_, ow_, f_};
    }

    Tensor forward(const Tensor& in, bool record) override {
        if (in.shape != std::vector<int>{h_, w_, c_}) {
            layer_error(tag_, "input shape " + shape_string(in.shape) + " does not match build");
        }
        const int rows = h_ * w_;
        const int cols = k_ * k_ * f_;
        std::vector<double> contrib(static_cast<std::size_t>(rows) * cols);
        MapConst x(in.data.data(), rows, c_);
        MapConst km(kernel_.value.data.data(), c_, cols);
        MapMat cm(contrib.data(), rows, cols);
        cm.noalias() = x * km;

        Tensor out({oh_, ow_, f_});
        scatter_add(contrib.data(), out.data.data());
        for (std::size_t r = 0; r < static_cast<std::size_t>(oh_) * ow_; ++r)
            for (int f = 0; f < f_; ++f) out.data[r * f_ + f] += bias_.value.data[f];
        if (record) {
            cached_input_ = in;
            has_cache_ = true;
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        const int rows = h_ * w_;
        const int cols = k_ * k_ * f_;
        std::vector<double> gcontrib(static_cast<std::size_t>(rows) * cols);
        gather(grad_out.data.data(), gcontrib.data());

        MapConst gc(gcontrib.data(), rows, cols);
        MapConst x(cached_input_.data.data(), rows, c_);
        MapMat gk(kernel_.grad.data.data(), c_, cols);
        gk.noalias() += x.transpose() * gc;
        for (std::size_t r = 0; r < static_cast<std::size_t>(oh_) * ow_; ++r)
            for (int f = 0; f < f_; ++f) bias_.grad.data[f] += grad_out.data[r * f_ + f];

        Tensor gin({h_, w_, c_});
        MapConst km(kernel_.value.data.data(), c_, cols);
        MapMat gx(gin.data.data(), rows, c_);
        gx.noalias() = gc * km.transpose();
        return gin;
    }

    void register_params(ParamStore& store, const std::string& prefix) override {
        kernel_.name = prefix + ".k";
        bias_.name = prefix + ".b";
        store.add(&kernel_);
        store.add(&bias_);
    }

private:
    // contrib row (ih,iw) column ((kh*k+kw)*F+f) lands at output (ih*s+kh, iw*s+kw, f)
    void scatter_add(const double* contrib, double* out) const {
        for (int ih = 0; ih < h_; ++ih) {
            for (int iw = 0; iw < w_; ++iw) {
                const double* row = contrib + (static_cast<std::size_t>(ih) * w_ + iw) *
                                                  (k_ * k_ * f_);
                for (int kh = 0; kh < k_; ++kh) {
                    double* dst = out + ((static_cast<std::size_t>(ih * s_ + kh) * ow_) +
                                         iw * s_) * f_;
                    const double* src = row + static_cast<std::size_t>(kh) * k_ * f_;
                    for (int t = 0; t < k_ * f_; ++t) dst[t] += src[t];
                }
            }
        }
    }

    void gather(const double* gout, double* gcontrib) const {
        for (int ih = 0; ih < h_; ++ih) {
            for (int iw = 0; iw < w_; ++iw) {
                double* row = gcontrib + (static_cast<std::size_t>(ih) * w_ + iw) * (k_ * k_ * f_);
                for (int kh = 0; kh < k_; ++kh) {
                    const double* src = gout + ((static_cast<std::size_t>(ih * s_ + kh) * ow_) +
                                                iw * s_) * f_;
                    std::copy(src, src + static_cast<std::size_t>(k_) * f_,
                              row + static_cast<std::size_t>(kh) * k_ * f_);
                }
            }
        }
    }

    int h_ = 0, w_ = 0, c_ = 0, k_ = 0, s_ = 0, f_ = 0, oh_ = 0, ow_ = 0;
    Param kernel_, bias_;
    Tensor cached_input_;
};

// ---------------------------------------------------------------------------

class ReluLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;
    std::vector<int> build(const std::vector<int>& in, Rng&) override { return in; }

    Tensor forward(const Tensor& in, bool record) override {
        Tensor out = in;
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
        if (record) {
            mask_.assign(in.size(), 0);
            for (std::size_t i = 0; i < in.size(); ++i) mask_[i] = in.data[i] > 0.0;
            has_cache_ = true;
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        Tensor gin = grad_out;
        for (std::size_t i = 0; i < gin.size(); ++i)
            if (!mask_[i]) gin.data[i] = 0.0;
        return gin;
    }

private:
    std::vector<char> mask_;
};

class LinearLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;
    std::vector<int> build(const std::vector<int>& in, Rng&) override { return in; }
    Tensor forward(const Tensor& in, bool record) override {
        if (record) has_cache_ = true;
        return in;
    }
    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        return grad_out;
    }
};

class ZeroPadLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;

    std::vector<int> build(const std::vector<int>& in, Rng&) override {
        if (in.size() != 3) layer_error(tag_, "expects (H,W,C) input, got " + shape_string(in));
        if (spec_.pad_h < 0 || spec_.pad_w < 0) layer_error(tag_, "negative padding");
        h_ = in[0];
        w_ = in[1];
        c_ = in[2];
        return {h_ + 2 * spec_.pad_h, w_ + 2 * spec_.pad_w, c_};
    }

    Tensor forward(const Tensor& in, bool record) override {
        Tensor out({h_ + 2 * spec_.pad_h, w_ + 2 * spec_.pad_w, c_});
        for (int i = 0; i < h_; ++i)
            for (int j = 0; j < w_; ++j)
                for (int c = 0; c < c_; ++c)
                    out.at3(i + spec_.pad_h, j + spec_.pad_w, c) = in.at3(i, j, c);
        if (record) has_cache_ = true;
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        Tensor gin({h_, w_, c_});
        for (int i = 0; i < h_; ++i)
            for (int j = 0; j < w_; ++j)
                for (int c = 0; c < c_; ++c)
                    gin.at3(i, j, c) = grad_out.at3(i + spec_.pad_h, j + spec_.pad_w, c);
        return gin;
    }

private:
    int h_ = 0, w_ = 0, c_ = 0;
};

class CropLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;

    std::vector<int> build(const std::vector<int>& in, Rng&) override {
        if (in.size() != 3) layer_error(tag_, "expects (H,W,C) input, got " + shape_string(in));
        if (spec_.crop_h < 0 || spec_.crop_w < 0) layer_error(tag_, "negative crop");
        h_ = in[0];
        w_ = in[1];
        c_ = in[2];
        if (h_ - 2 * spec_.crop_h < 1 || w_ - 2 * spec_.crop_w < 1) {
            layer_error(tag_, "crop removes the whole input " + shape_string(in));
        }
        return {h_ - 2 * spec_.crop_h, w_ - 2 * spec_.crop_w, c_};
    }

    Tensor forward(const Tensor& in, bool record) override {
        Tensor out({h_ - 2 * spec_.crop_h, w_ - 2 * spec_.crop_w, c_});
        for (int i = 0; i < out.shape[0]; ++i)
            for (int j = 0; j < out.shape[1]; ++j)
                for (int c = 0; c < c_; ++c)
                    out.at3(i, j, c) = in.at3(i + spec_.crop_h, j + spec_.crop_w, c);
        if (record) has_cache_ = true;
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        Tensor gin({h_, w_, c_});
        for (int i = 0; i < grad_out.shape[0]; ++i)
            for (int j = 0; j < grad_out.shape[1]; ++j)
                for (int c = 0; c < c_; ++c)
                    gin.at3(i + spec_.crop_h, j + spec_.crop_w, c) = grad_out.at3(i, j, c);
        return gin;
    }

private:
    int h_ = 0, w_ = 0, c_ = 0;
};

class FlattenLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;
    std::vector<int> build(const std::vector<int>& in, Rng&) override {
        in_shape_ = in;
        return {static_cast<int>(Tensor::count(in))};
    }
    Tensor forward(const Tensor& in, bool record) override {
        if (record) has_cache_ = true;
        return Tensor({static_cast<int>(in.size())}, in.data);
    }
    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        return Tensor(in_shape_, grad_out.data);
    }

private:
    std::vector<int> in_shape_;
};

class ReshapeLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;
    std::vector<int> build(const std::vector<int>& in, Rng&) override {
        if (Tensor::count(in) != Tensor::count(spec_.shape)) {
            layer_error(tag_, "cannot reshape " + shape_string(in) + " to " +
                                  shape_string(spec_.shape));
        }
        in_shape_ = in;
        return spec_.shape;
    }
    Tensor forward(const Tensor& in, bool record) override {
        if (record) has_cache_ = true;
        return Tensor(spec_.shape, in.data);
    }
    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        return Tensor(in_shape_, grad_out.data);
    }

private:
    std::vector<int> in_shape_;
};

/// Appends a fixed side vector (the flattened measurements) to a flat input.
/// The backward pass returns only the primary-input slice of the gradient.
class ConcatLayer final : public LayerBase {
public:
    using LayerBase::LayerBase;
    std::vector<int> build(const std::vector<int>& in, Rng&) override {
        if (in.size() != 1) layer_error(tag_, "expects a flat input, got " + shape_string(in));
        if (spec_.aux_width < 1) layer_error(tag_, "aux_width must be >= 1");
        in_dim_ = in[0];
        return {in_dim_ + spec_.aux_width};
    }
    void set_aux(const std::vector<double>& aux) override {
        if (static_cast<int>(aux.size()) != spec_.aux_width) {
            layer_error(tag_, "side input length " + std::to_string(aux.size()) +
                                  " != " + std::to_string(spec_.aux_width));
        }
        aux_ = aux;
    }
    Tensor forward(const Tensor& in, bool record) override {
        if (static_cast<int>(aux_.size()) != spec_.aux_width) {
            throw std::runtime_error(tag_ + ": side input not set");
        }
        Tensor out({in_dim_ + spec_.aux_width});
        std::copy(in.data.begin(), in.data.end(), out.data.begin());
        std::copy(aux_.begin(), aux_.end(), out.data.begin() + in_dim_);
        if (record) has_cache_ = true;
        return out;
    }
    Tensor backward(const Tensor& grad_out) override {
        require_cache();
        has_cache_ = false;
        Tensor gin({in_dim_});
        std::copy(grad_out.data.begin(), grad_out.data.begin() + in_dim_, gin.data.begin());
        return gin;
    }

private:
    int in_dim_ = 0;
    std::vector<double> aux_;
};

} // namespace

// ---------------------------------------------------------------------------

nlohmann::json LayerSpec::to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    if (kind == "dense") j["units"] = units;
    if (kind == "conv2d" || kind == "conv2d_transpose") {
        j["filters"] = filters;
        j["kernel"] = kernel;
        j["stride"] = stride;
    }
    if (kind == "zero_pad") {
        j["pad_h"] = pad_h;
        j["pad_w"] = pad_w;
    }
    if (kind == "crop") {
        j["crop_h"] = crop_h;
        j["crop_w"] = crop_w;
    }
    if (kind == "reshape") j["shape"] = shape;
    if (kind == "concat") j["aux_width"] = aux_width;
    return j;
}

LayerSpec LayerSpec::from_json(const nlohmann::json& j) {
    LayerSpec s;
    s.kind = j.at("kind").get<std::string>();
    s.units = j.value("units", 0);
    s.filters = j.value("filters", 0);
    s.kernel = j.value("kernel", 2);
    s.stride = j.value("stride", 2);
    s.pad_h = j.value("pad_h", 0);
    s.pad_w = j.value("pad_w", 0);
    s.crop_h = j.value("crop_h", 0);
    s.crop_w = j.value("crop_w", 0);
    if (j.contains("shape")) s.shape = j.at("shape").get<std::vector<int>>();
    s.aux_width = j.value("aux_width", 0);
    return s;
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, int index) {
    if (spec.kind == "dense") return std::make_unique<DenseLayer>(spec, index);
    if (spec.kind == "conv2d") return std::make_unique<Conv2dLayer>(spec, index);
    if (spec.kind == "conv2d_transpose") return std::make_unique<ConvTranspose2dLayer>(spec, index);
    if (spec.kind == "relu") return std::make_unique<ReluLayer>(spec, index);
    if (spec.kind == "linear") return std::make_unique<LinearLayer>(spec, index);
    if (spec.kind == "zero_pad") return std::make_unique<ZeroPadLayer>(spec, index);
    if (spec.kind == "crop") return std::make_unique<CropLayer>(spec, index);
    if (spec.kind == "flatten") return std::make_unique<FlattenLayer>(spec, index);
    if (spec.kind == "reshape") return std::make_unique<ReshapeLayer>(spec, index);
    if (spec.kind == "concat") return std::make_unique<ConcatLayer>(spec, index);
    throw std::invalid_argument("make_layer: unknown layer kind '" + spec.kind + "'");
}

void Network::add(const LayerSpec& spec) {
    if (built_) throw std::logic_error("Network::add: network already built");
    layers_.push_back(make_layer(spec, static_cast<int>(layers_.size())));
}

std::vector<int> Network::build(const std::vector<int>& input_shape, Rng& rng) {
    input_shape_ = input_shape;
    std::vector<int> shape = input_shape;
    for (auto& layer : layers_) shape = layer->build(shape, rng);
    output_shape_ = shape;
    built_ = true;
    return shape;
}

Tensor Network::forward(const Tensor& in, bool record) {
    if (!built_) throw std::logic_error("Network::forward: build first");
    if (in.shape != input_shape_) {
        throw std::invalid_argument("Network::forward: input shape " + shape_string(in.shape) +
                                    " != expected " + shape_string(input_shape_));
    }
    Tensor t = in;
    for (auto& layer : layers_) t = layer->forward(t, record);
    return t;
}

Tensor Network::backward(const Tensor& grad_out) {
    if (grad_out.shape != output_shape_) {
        throw std::invalid_argument("Network::backward: gradient shape mismatch");
    }
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Network::register_params(ParamStore& store, const std::string& prefix) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->register_params(store, prefix + "." + std::to_string(i) + "." +
                                               layers_[i]->spec().kind);
    }
}

void Network::set_aux(const std::vector<double>& aux) {
    for (auto& layer : layers_) layer->set_aux(aux);
}

std::vector<LayerSpec> Network::specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers_.size());
    for (const auto& layer : layers_) out.push_back(layer->spec());
    return out;
}

} // namespace flowrecon::nn
