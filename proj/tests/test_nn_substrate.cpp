#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowrecon/adam.hpp"
#include "flowrecon/layers.hpp"
#include "flowrecon/rng.hpp"
#include "oracles.hpp"

using namespace flowrecon;
using nn::LayerSpec;
using nn::Network;
using nn::ParamStore;
using nn::Tensor;

namespace {

LayerSpec spec_of(const std::string& kind) {
    LayerSpec s;
    s.kind = kind;
    return s;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double weighted_sum(const Tensor& out, const Tensor& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.data[i] * w.data[i];
    return s;
}

/// Builds a one-layer network, checks input and parameter gradients of the
/// linear functional <w, layer(x)> against central differences.
void check_layer_gradients(const LayerSpec& spec, const std::vector<int>& in_shape,
                           std::uint64_t seed, double tol = 1e-5) {
    Network net;
    net.add(spec);
    Rng build_rng(seed);
    net.build(in_shape, build_rng);
    if (spec.kind == "concat") {
        Rng aux_rng(seed + 1);
        std::vector<double> aux(static_cast<std::size_t>(spec.aux_width));
        for (double& v : aux) v = aux_rng.uniform(-1.0, 1.0);
        net.set_aux(aux);
    }
    ParamStore store;
    net.register_params(store, "t");

    Rng data_rng(seed + 2);
    Tensor x = random_tensor(in_shape, data_rng);
    // keep ReLU preactivations away from the kink
    if (spec.kind == "relu") {
        for (double& v : x.data) {
            if (std::abs(v) < 0.05) v = v >= 0.0 ? v + 0.05 : v - 0.05;
        }
    }
    const Tensor w = random_tensor(net.output_shape(), data_rng);

    store.zero_grads();
    const Tensor out = net.forward(x, true);
    const Tensor gin = net.backward(w);

    auto eval = [&] { return weighted_sum(net.forward(x, false), w); };

    const double in_err = oracle::fd_max_rel_error(x.data, gin.data, eval);
    CAPTURE(spec.kind);
    CHECK(in_err <= tol);

    for (std::size_t p = 0; p < store.size(); ++p) {
        const double p_err = oracle::fd_max_rel_error(store.at(p).value.data,
                                                      store.at(p).grad.data, eval);
        CAPTURE(store.at(p).name);
        CHECK(p_err <= tol);
    }
}

} // namespace

TEST_CASE("wake encoder stack compresses to the documented shape") {
    Network net;
    LayerSpec pad = spec_of("zero_pad");
    pad.pad_h = 3;
    pad.pad_w = 4;
    net.add(pad);
    LayerSpec c1 = spec_of("conv2d");
    c1.filters = 160;
    c1.kernel = 2;
    c1.stride = 2;
    net.add(c1);
    net.add(spec_of("relu"));
    LayerSpec c2 = c1;
    c2.filters = 200;
    net.add(c2);
    net.add(spec_of("relu"));
    Rng rng(1);
    // (H, W, C) = (50, 160, 2); intermediate shapes transpose the
    // (horizontal, vertical, channels) tuples the architecture is quoted in
    CHECK(net.build({50, 160, 2}, rng) == std::vector<int>{14, 42, 200});

    Network probe;
    probe.add(pad);
    Rng rng2(1);
    CHECK(probe.build({50, 160, 2}, rng2) == std::vector<int>{56, 168, 2});
}

TEST_CASE("current-data encoder compression and decoder expansion shapes") {
    Network enc;
    LayerSpec c1 = spec_of("conv2d");
    c1.filters = 64;
    LayerSpec c2 = spec_of("conv2d");
    c2.filters = 128;
    enc.add(c1);
    enc.add(spec_of("relu"));
    enc.add(c2);
    enc.add(spec_of("relu"));
    Rng rng(2);
    CHECK(enc.build({32, 32, 2}, rng) == std::vector<int>{8, 8, 128});

    // stride-2 transpose doubles spatial dims
    Network dec;
    LayerSpec t1 = spec_of("conv2d_transpose");
    t1.filters = 64;
    dec.add(t1);
    Rng rng2(3);
    CHECK(dec.build({8, 8, 128}, rng2) == std::vector<int>{16, 16, 64});
}

TEST_CASE("conv2d with a 1x1 identity kernel is the identity") {
    Network net;
    LayerSpec c = spec_of("conv2d");
    c.filters = 3;
    c.kernel = 1;
    c.stride = 1;
    net.add(c);
    Rng rng(4);
    net.build({5, 4, 3}, rng);
    ParamStore store;
    net.register_params(store, "t");
    // kernel (1,1,3,3) = identity, bias = 0
    for (std::size_t i = 0; i < store.at(0).value.size(); ++i) store.at(0).value.data[i] = 0.0;
    for (int c0 = 0; c0 < 3; ++c0) store.at(0).value.data[static_cast<std::size_t>(c0) * 3 + c0] = 1.0;
    for (double& b : store.at(1).value.data) b = 0.0;

    Rng data_rng(5);
    const Tensor x = random_tensor({5, 4, 3}, data_rng);
    CHECK(net.forward(x, false).data == x.data);
}

TEST_CASE("conv2d matches the naive direct convolution to 1e-12") {
    Rng rng(6);
    for (const int stride : {1, 2}) {
        Network net;
        LayerSpec c = spec_of("conv2d");
        c.filters = 4;
        c.kernel = 2;
        c.stride = stride;
        net.add(c);
        Rng build_rng(7);
        net.build({6, 8, 3}, build_rng);
        ParamStore store;
        net.register_params(store, "t");

        const Tensor x = random_tensor({6, 8, 3}, rng);
        const Tensor got = net.forward(x, false);
        const Tensor expect = oracle::conv2d_naive(x, store.at(0).value, store.at(1).value.data,
                                                   stride);
        REQUIRE(got.shape == expect.shape);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("conv2d_transpose matches naive summation and the adjoint identity") {
    Rng rng(8);
    Network net;
    LayerSpec t = spec_of("conv2d_transpose");
    t.filters = 3;
    t.kernel = 2;
    t.stride = 2;
    net.add(t);
    Rng build_rng(9);
    net.build({4, 5, 2}, build_rng);
    ParamStore store;
    net.register_params(store, "t");

    const Tensor x = random_tensor({4, 5, 2}, rng);
    const Tensor got = net.forward(x, false);
    const Tensor expect = oracle::convt2d_naive(x, store.at(0).value, store.at(1).value.data, 2);
    REQUIRE(got.shape == expect.shape);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12).scale(1.0));
    }

    // adjoint identity: <conv(a), b> == <a, convT(b)> with transposed kernels,
    // zero biases
    Network conv;
    LayerSpec c = spec_of("conv2d");
    c.filters = 2; // conv: (4,5,3)-ish reversed roles: input channels 3 -> filters 2
    c.kernel = 2;
    c.stride = 2;
    conv.add(c);
    Rng crng(10);
    conv.build({8, 10, 3}, crng);
    ParamStore cstore;
    conv.register_params(cstore, "c");
    for (double& b : cstore.at(1).value.data) b = 0.0;

    Network convt;
    LayerSpec ct = spec_of("conv2d_transpose");
    ct.filters = 3;
    ct.kernel = 2;
    ct.stride = 2;
    convt.add(ct);
    Rng trng(11);
    convt.build({4, 5, 2}, trng);
    ParamStore tstore;
    convt.register_params(tstore, "ct");
    for (double& b : tstore.at(1).value.data) b = 0.0;
    // convT kernel (C=2, k, k, F=3) mirrors conv kernel (k, k, 3, 2)
    const Tensor& ck = cstore.at(0).value;
    Tensor& tk = tstore.at(0).value;
    for (int ki = 0; ki < 2; ++ki)
        for (int kj = 0; kj < 2; ++kj)
            for (int ci = 0; ci < 3; ++ci)
                for (int f = 0; f < 2; ++f) {
                    tk.data[((static_cast<std::size_t>(f) * 2 + ki) * 2 + kj) * 3 + ci] =
                        ck.data[((static_cast<std::size_t>(ki) * 2 + kj) * 3 + ci) * 2 + f];
                }

    Rng drng(12);
    const Tensor a = random_tensor({8, 10, 3}, drng);
    const Tensor b = random_tensor({4, 5, 2}, drng);
    const double lhs = weighted_sum(conv.forward(a, false), b);
    const double rhs = weighted_sum(a, convt.forward(b, false));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("conv2d_transpose of ones counts kernel overlaps") {
    Network net;
    LayerSpec t = spec_of("conv2d_transpose");
    t.filters = 1;
    t.kernel = 2;
    t.stride = 1; // stride 1 makes interior cells overlap
    net.add(t);
    Rng rng(13);
    net.build({3, 3, 1}, rng);
    ParamStore store;
    net.register_params(store, "t");
    for (double& v : store.at(0).value.data) v = 1.0;
    for (double& v : store.at(1).value.data) v = 0.0;

    Tensor ones({3, 3, 1});
    for (double& v : ones.data) v = 1.0;
    const Tensor out = net.forward(ones, false);
    REQUIRE(out.shape == std::vector<int>{4, 4, 1});
    // overlap counts: corners 1, edges 2, interior 4
    CHECK(out.at3(0, 0, 0) == 1.0);
    CHECK(out.at3(0, 1, 0) == 2.0);
    CHECK(out.at3(1, 1, 0) == 4.0);
    CHECK(out.at3(3, 3, 0) == 1.0);
}

TEST_CASE("every layer kind: analytic gradients match finite differences") {
    LayerSpec dense = spec_of("dense");
    dense.units = 7;
    check_layer_gradients(dense, {11}, 100);

    LayerSpec conv = spec_of("conv2d");
    conv.filters = 3;
    conv.kernel = 2;
    conv.stride = 2;
    check_layer_gradients(conv, {6, 4, 2}, 101);

    LayerSpec convt = spec_of("conv2d_transpose");
    convt.filters = 2;
    convt.kernel = 2;
    convt.stride = 2;
    check_layer_gradients(convt, {3, 4, 3}, 102);

    check_layer_gradients(spec_of("relu"), {5, 3, 2}, 103);
    check_layer_gradients(spec_of("linear"), {9}, 104);

    LayerSpec pad = spec_of("zero_pad");
    pad.pad_h = 2;
    pad.pad_w = 1;
    check_layer_gradients(pad, {3, 4, 2}, 105);

    LayerSpec crop = spec_of("crop");
    crop.crop_h = 1;
    crop.crop_w = 1;
    check_layer_gradients(crop, {5, 4, 2}, 106);

    check_layer_gradients(spec_of("flatten"), {3, 2, 2}, 107);

    LayerSpec reshape = spec_of("reshape");
    reshape.shape = {4, 3, 1};
    check_layer_gradients(reshape, {12}, 108);

    LayerSpec concat = spec_of("concat");
    concat.aux_width = 5;
    check_layer_gradients(concat, {6}, 109);
}

TEST_CASE("composed encoder-style stack: finite-difference agreement") {
    Network net;
    LayerSpec c = spec_of("conv2d");
    c.filters = 3;
    net.add(c);
    net.add(spec_of("relu"));
    net.add(spec_of("flatten"));
    LayerSpec d = spec_of("dense");
    d.units = 4;
    net.add(d);
    Rng rng(110);
    net.build({6, 6, 2}, rng);
    ParamStore store;
    net.register_params(store, "t");

    Rng data_rng(111);
    Tensor x = random_tensor({6, 6, 2}, data_rng);
    const Tensor w = random_tensor(net.output_shape(), data_rng);
    store.zero_grads();
    net.forward(x, true);
    const Tensor gin = net.backward(w);
    auto eval = [&] { return weighted_sum(net.forward(x, false), w); };
    CHECK(oracle::fd_max_rel_error(x.data, gin.data, eval) <= 1e-5);
    for (std::size_t p = 0; p < store.size(); ++p) {
        CHECK(oracle::fd_max_rel_error(store.at(p).value.data, store.at(p).grad.data, eval) <=
              1e-5);
    }
}

TEST_CASE("relu passes gradients through at strictly positive inputs") {
    Network net;
    net.add(spec_of("relu"));
    Rng rng(14);
    net.build({4}, rng);
    const Tensor x({4}, {0.5, 1.0, 2.0, 0.1});
    net.forward(x, true);
    const Tensor g({4}, {1.0, -2.0, 3.0, 4.0});
    CHECK(net.backward(g).data == g.data);
}

TEST_CASE("dense gradients equal the closed-form matrix expressions") {
    Network net;
    LayerSpec d = spec_of("dense");
    d.units = 3;
    net.add(d);
    Rng rng(15);
    net.build({4}, rng);
    ParamStore store;
    net.register_params(store, "t");

    Rng data_rng(16);
    const Tensor x = random_tensor({4}, data_rng);
    const Tensor g = random_tensor({3}, data_rng);
    store.zero_grads();
    net.forward(x, true);
    const Tensor gin = net.backward(g);

    const auto& w = store.at(0).value;
    for (int u = 0; u < 3; ++u) {
        for (int i = 0; i < 4; ++i) {
            CHECK(store.at(0).grad.data[static_cast<std::size_t>(u) * 4 + i] ==
                  doctest::Approx(g.data[u] * x.data[i]).epsilon(1e-14));
        }
        CHECK(store.at(1).grad.data[static_cast<std::size_t>(u)] ==
              doctest::Approx(g.data[u]).epsilon(1e-14));
    }
    for (int i = 0; i < 4; ++i) {
        double expect = 0.0;
        for (int u = 0; u < 3; ++u) expect += w.data[static_cast<std::size_t>(u) * 4 + i] * g.data[u];
        CHECK(gin.data[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
    Network net;
    LayerSpec d = spec_of("dense");
    d.units = 5;
    net.add(d);
    Rng rng(17);
    net.build({6}, rng);
    ParamStore store;
    net.register_params(store, "t");

    Rng data_rng(18);
    const Tensor x = random_tensor({6}, data_rng);
    const Tensor g1 = random_tensor({5}, data_rng);
    const Tensor g2 = random_tensor({5}, data_rng);

    store.zero_grads();
    net.forward(x, true);
    net.backward(g1);
    net.forward(x, true);
    net.backward(g2);
    const auto grads_sum = store.at(0).grad.data;

    store.zero_grads();
    Tensor g12({5});
    for (std::size_t i = 0; i < 5; ++i) g12.data[i] = g1.data[i] + g2.data[i];
    net.forward(x, true);
    net.backward(g12);
    for (std::size_t i = 0; i < grads_sum.size(); ++i) {
        CHECK(store.at(0).grad.data[i] == doctest::Approx(grads_sum[i]).epsilon(1e-12));
    }
}

TEST_CASE("shape errors name the offending layer; stale tapes are rejected") {
    Network net;
    LayerSpec c = spec_of("conv2d");
    c.filters = 2;
    c.kernel = 2;
    c.stride = 2;
    net.add(c);
    Rng rng(19);
    CHECK_THROWS_WITH_AS(net.build({7, 7, 1}, rng),
                         doctest::Contains("conv2d (layer 0)"), std::invalid_argument);

    Network ok;
    LayerSpec d = spec_of("dense");
    d.units = 2;
    ok.add(d);
    Rng rng2(20);
    ok.build({3}, rng2);
    Rng data_rng(21);
    const Tensor x = random_tensor({3}, data_rng);
    ok.forward(x, true);
    ok.backward(random_tensor({2}, data_rng));
    CHECK_THROWS_WITH_AS(ok.backward(random_tensor({2}, data_rng)),
                         doctest::Contains("stale tape"), std::runtime_error);
    // forward without recording leaves no tape either
    ok.forward(x, false);
    CHECK_THROWS_AS(ok.backward(random_tensor({2}, data_rng)), std::runtime_error);
}

TEST_CASE("forward is deterministic") {
    Network net;
    LayerSpec c = spec_of("conv2d");
    c.filters = 3;
    net.add(c);
    net.add(spec_of("relu"));
    Rng rng(22);
    net.build({4, 4, 2}, rng);
    Rng data_rng(23);
    const Tensor x = random_tensor({4, 4, 2}, data_rng);
    CHECK(net.forward(x, false).data == net.forward(x, false).data);
}

TEST_CASE("adam: first step on a unit gradient moves by about -lr") {
    nn::Param p;
    p.name = "w";
    p.value = Tensor({1}, {0.0});
    p.grad = Tensor({1}, {1.0});
    ParamStore store;
    store.add(&p);
    nn::AdamState adam(store, nn::AdamConfig{});
    adam.step(store);
    // m_hat = 1, v_hat = 1 after bias correction: step = lr / (1 + eps-ish)
    CHECK(p.value.data[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p.grad.data[0] == 0.0);
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
    nn::Param p;
    p.value = Tensor({2}, {0.7, -0.3});
    p.grad = Tensor({2}, {0.0, 0.0});
    ParamStore store;
    store.add(&p);
    nn::AdamState adam(store, nn::AdamConfig{});
    for (int s = 0; s < 5; ++s) adam.step(store);
    CHECK(p.value.data[0] == 0.7);
    CHECK(p.value.data[1] == -0.3);
}

TEST_CASE("adam: independent parameters update independently") {
    nn::Param a, b;
    a.value = Tensor({1}, {0.0});
    a.grad = Tensor({1}, {1.0});
    b.value = Tensor({1}, {0.0});
    b.grad = Tensor({1}, {0.0});
    ParamStore store;
    store.add(&a);
    store.add(&b);
    nn::AdamState adam(store, nn::AdamConfig{});
    adam.step(store);
    CHECK(a.value.data[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(b.value.data[0] == 0.0);
}
