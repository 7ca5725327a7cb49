#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "trajlab/attention.hpp"
#include "trajlab/layers.hpp"
#include "trajlab/losses.hpp"
#include "trajlab/models.hpp"
#include "trajlab/ops.hpp"
#include "trajlab/training.hpp"

namespace trajlab::check {

struct GradientCase {
    std::string name;
    std::function<GradCheck()> run;
};

namespace detail {

/// Reduces any output to a scalar through fixed random weights so that every
/// output element carries a distinct gradient.
inline Tensor project(const Tensor& y, std::uint64_t seed = 99) {
    std::mt19937_64 rng(seed);
    Tensor w = random_tensor(y.shape(), rng, -1.0, 1.0, false);
    return ops::sum(ops::mul(y, w));
}

inline GradCheck check_params(const std::function<Tensor()>& f, const ParameterList& params,
                              std::vector<Tensor> inputs = {}) {
    std::vector<Tensor> leaves = std::move(inputs);
    std::vector<std::string> names(leaves.size(), "input");
    for (const auto& p : params) {
        leaves.push_back(p.tensor);
        names.push_back(p.name);
    }
    return gradient_check(f, leaves, names);
}

inline PreparedBatch tiny_batch(std::size_t batch, std::size_t obs, std::size_t pred, std::size_t k, bool quantized,
                                std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> c(0, k - 1);
    PreparedBatch b;
    b.batch = batch;
    b.obs_len = obs;
    b.pred_len = pred;
    for (std::size_t i = 0; i < batch * obs; ++i) {
        b.obs_values.push_back({u(rng), u(rng)});
        b.obs_valid.push_back(i % obs != 1);
        if (quantized) b.obs_classes.push_back(c(rng));
    }
    for (std::size_t i = 0; i < batch * pred; ++i) {
        b.future_values.push_back({u(rng), u(rng)});
        if (quantized) b.future_classes.push_back(c(rng));
    }
    return b;
}

inline GradientCase network_case(Architecture arch, HeadKind head) {
    return {"network " + to_string(arch) + "/" + to_string(head), [arch, head] {
                ModelConfig cfg;
                cfg.architecture = arch;
                cfg.head = head;
                cfg.d_model = 4;
                cfg.layers = 1;
                cfg.heads = 2;
                cfg.num_classes = 3;
                cfg.obs_len = 3;
                cfg.pred_len = 2;
                cfg.ff_multiplier = 2;
                cfg.dropout_rate = 0.0;
                cfg.seed = 5;
                auto net = make_network(cfg);
                std::mt19937_64 data_rng(6);
                const PreparedBatch b = tiny_batch(2, 3, 2, 3, head == HeadKind::quantized, data_rng);
                ParameterList params;
                net->collect(params);
                auto f = [&] {
                    std::mt19937_64 rng(7);
                    const TrainOutputs out = net->training_outputs(b, DropoutContext{}, rng);
                    return head_loss(head, out, b);
                };
                return check_params(f, params);
            }};
}

}  // namespace detail

/// Every differentiable op, layer, loss and network of the library.
inline std::vector<GradientCase> gradient_suite() {
    using detail::check_params;
    using detail::project;
    std::vector<GradientCase> cases;
    auto unary = [&](std::string name, std::function<Tensor(const Tensor&)> op, double lo = -1.0, double hi = 1.0) {
        cases.push_back({std::move(name), [op, lo, hi] {
                             std::mt19937_64 rng(1);
                             Tensor x = random_tensor({3, 4}, rng, lo, hi);
                             return gradient_check([&] { return project(op(x)); }, {x}, {"x"});
                         }});
    };
    auto binary = [&](std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op, Shape sa, Shape sb) {
        cases.push_back({std::move(name), [op, sa, sb] {
                             std::mt19937_64 rng(2);
                             Tensor a = random_tensor(sa, rng), b = random_tensor(sb, rng);
                             return gradient_check([&] { return project(op(a, b)); }, {a, b}, {"a", "b"});
                         }});
    };

    binary("matmul", ops::matmul, {3, 4}, {4, 5});
    binary("add", ops::add, {3, 4}, {3, 4});
    binary("sub", ops::sub, {3, 4}, {3, 4});
    binary("mul", ops::mul, {3, 4}, {3, 4});
    binary("add_bias", ops::add_bias, {3, 4}, {4});
    unary("scale", [](const Tensor& x) { return ops::scale(x, -1.7); });
    unary("relu", ops::relu, 0.05, 1.0);
    unary("relu negative side", [](const Tensor& x) { return ops::relu(ops::scale(x, -1.0)); }, 0.05, 1.0);
    unary("sigmoid", ops::sigmoid, -3.0, 3.0);
    unary("tanh", ops::tanh, -2.0, 2.0);
    unary("exp", ops::exp);
    unary("sum", [](const Tensor& x) { return ops::sum(ops::mul(x, x)); });
    unary("mean", [](const Tensor& x) { return ops::mean(ops::mul(x, x)); });
    unary("slice_rows", [](const Tensor& x) { return ops::slice_rows(x, 1, 2); });
    unary("slice_cols", [](const Tensor& x) { return ops::slice_cols(x, 1, 2); });
    unary("concat_rows", [](const Tensor& x) {
        const Tensor parts[] = {x, ops::scale(x, 2.0)};
        return ops::concat_rows(parts);
    });
    unary("concat_cols", [](const Tensor& x) {
        const Tensor parts[] = {ops::slice_cols(x, 0, 1), ops::exp(x)};
        return ops::concat_cols(parts);
    });
    unary("gather_rows", [](const Tensor& x) {
        const std::size_t idx[] = {2, 0, 2, 1};
        return ops::gather_rows(x, idx);
    });
    unary("reshape", [](const Tensor& x) { return ops::matmul(ops::reshape(x, {6, 2}), ops::reshape(x, {2, 6})); });
    unary("softmax_rows", ops::softmax_rows, -2.0, 2.0);
    unary("dropout (training)", [](const Tensor& x) {
        std::mt19937_64 rng(3);
        return ops::dropout(x, 0.4, rng, true);
    });
    cases.push_back({"layer_norm", [] {
                         std::mt19937_64 rng(4);
                         Tensor x = random_tensor({3, 5}, rng, -2.0, 2.0);
                         Tensor g = random_tensor({5}, rng, 0.5, 1.5), b = random_tensor({5}, rng);
                         return gradient_check([&] { return project(ops::layer_norm(x, g, b)); }, {x, g, b},
                                               {"x", "gamma", "beta"});
                     }});
    cases.push_back({"scaled_dot_attention (causal)", [] {
                         std::mt19937_64 rng(5);
                         Tensor q = random_tensor({4, 3}, rng), k = random_tensor({4, 3}, rng),
                                v = random_tensor({4, 2}, rng);
                         const AttentionMask m = AttentionMask::causal(4);
                         return gradient_check([&] { return project(scaled_dot_attention(q, k, v, m)); }, {q, k, v},
                                               {"q", "k", "v"});
                     }});
    cases.push_back({"multi_head_attention (per-element masks)", [] {
                         std::mt19937_64 rng(6);
                         Tensor q = random_tensor({2 * 3, 4}, rng), k = random_tensor({2 * 5, 4}, rng),
                                v = random_tensor({2 * 5, 4}, rng);
                         const std::vector<AttentionMask> masks{
                             AttentionMask::key_padding(3, {true, false, true, true, true}),
                             AttentionMask::key_padding(3, {true, true, true, false, false})};
                         return gradient_check([&] { return project(multi_head_attention(q, k, v, 2, 2, masks)); },
                                               {q, k, v}, {"q", "k", "v"});
                     }});

    cases.push_back({"Linear", [] {
                         std::mt19937_64 rng(7);
                         Linear layer(4, 3, rng);
                         Tensor x = random_tensor({5, 4}, rng);
                         ParameterList p;
                         layer.collect("linear", p);
                         return check_params([&] { return project(layer(x)); }, p, {x});
                     }});
    cases.push_back({"LayerNorm", [] {
                         std::mt19937_64 rng(8);
                         LayerNorm layer(6);
                         Tensor x = random_tensor({3, 6}, rng, -2.0, 2.0);
                         ParameterList p;
                         layer.collect("norm", p);
                         return check_params([&] { return project(layer(x)); }, p, {x});
                     }});
    cases.push_back({"Embedding", [] {
                         std::mt19937_64 rng(9);
                         Embedding layer(5, 3, rng);
                         const std::size_t idx[] = {4, 1, 1, 0};
                         ParameterList p;
                         layer.collect("embedding", p);
                         return check_params([&] { return project(layer(idx)); }, p);
                     }});
    cases.push_back({"MultiHeadAttention (cross, batched)", [] {
                         std::mt19937_64 rng(10);
                         MultiHeadAttention layer(4, 2, rng);
                         Tensor x = random_tensor({2 * 3, 4}, rng), mem = random_tensor({2 * 4, 4}, rng);
                         const AttentionMask m = AttentionMask::full(3, 4);
                         ParameterList p;
                         layer.collect("attn", p);
                         return check_params([&] { return project(layer(x, mem, 2, {&m, 1})); }, p, {x, mem});
                     }});
    cases.push_back({"FeedForward (dropout)", [] {
                         std::mt19937_64 rng(11);
                         FeedForward layer(4, 8, rng);
                         Tensor x = random_tensor({3, 4}, rng);
                         ParameterList p;
                         layer.collect("ff", p);
                         return check_params(
                             [&] {
                                 std::mt19937_64 drop(12);
                                 return project(layer(x, DropoutContext{0.2, &drop, true}));
                             },
                             p, {x});
                     }});
    cases.push_back({"EncoderLayer", [] {
                         std::mt19937_64 rng(13);
                         EncoderLayer layer(4, 2, 8, rng);
                         Tensor x = random_tensor({2 * 3, 4}, rng);
                         const AttentionMask m = AttentionMask::key_padding(3, {true, false, true});
                         ParameterList p;
                         layer.collect("enc", p);
                         return check_params([&] { return project(layer(x, 2, {&m, 1}, DropoutContext{})); }, p, {x});
                     }});
    cases.push_back({"DecoderLayer", [] {
                         std::mt19937_64 rng(14);
                         DecoderLayer layer(4, 2, 8, rng);
                         Tensor x = random_tensor({2 * 3, 4}, rng), mem = random_tensor({2 * 4, 4}, rng);
                         const AttentionMask self = AttentionMask::causal(3);
                         const AttentionMask cross = AttentionMask::full(3, 4);
                         ParameterList p;
                         layer.collect("dec", p);
                         return check_params(
                             [&] { return project(layer(x, mem, 2, {&self, 1}, {&cross, 1}, DropoutContext{})); }, p,
                             {x, mem});
                     }});
    cases.push_back({"LstmCell (two steps)", [] {
                         std::mt19937_64 rng(15);
                         LstmCell cell(3, 4, rng);
                         Tensor x0 = random_tensor({2, 3}, rng), x1 = random_tensor({2, 3}, rng);
                         ParameterList p;
                         cell.collect("lstm", p);
                         return check_params(
                             [&] {
                                 LstmState s = cell(x0, cell.zero_state(2));
                                 s = cell(x1, s);
                                 return project(ops::add(s.h, ops::scale(s.c, 0.5)));
                             },
                             p, {x0, x1});
                     }});

    cases.push_back({"l2 loss", [] {
                         std::mt19937_64 rng(16);
                         Tensor pred = random_tensor({5, 2}, rng);
                         const std::vector<Vec2> target{{0.1, 0.2}, {-0.3, 0.5}, {1.0, -1.0}, {0.0, 0.0}, {0.7, 0.1}};
                         return gradient_check([&] { return l2_loss(pred, target); }, {pred}, {"pred"});
                     }});
    cases.push_back({"gaussian nll loss", [] {
                         std::mt19937_64 rng(17);
                         Tensor raw = random_tensor({4, 5}, rng, -0.8, 0.8);
                         const std::vector<Vec2> target{{0.1, 0.2}, {-0.3, 0.5}, {1.0, -1.0}, {0.4, 0.0}};
                         return gradient_check([&] { return gaussian_nll_loss(raw, target); }, {raw}, {"raw"});
                     }});
    cases.push_back({"cross entropy loss", [] {
                         std::mt19937_64 rng(18);
                         Tensor logits = random_tensor({4, 6}, rng, -2.0, 2.0);
                         const std::vector<std::size_t> target{0, 5, 2, 2};
                         return gradient_check([&] { return cross_entropy_loss(logits, target); }, {logits},
                                               {"logits"});
                     }});

    for (auto arch : {Architecture::tf, Architecture::bert_ar, Architecture::bert_os, Architecture::lstm})
        for (auto head : {HeadKind::regressive, HeadKind::gaussian, HeadKind::quantized})
            cases.push_back(detail::network_case(arch, head));
    return cases;
}

}  // namespace trajlab::check
