#include "trajlab/layers.hpp"

#include <cmath>

#include "trajlab/errors.hpp"
#include "trajlab/ops.hpp"

namespace trajlab {

namespace {

Tensor uniform_parameter(Shape shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = dist(rng);
    return Tensor(std::move(shape), std::move(values), true);
}

}  // namespace

std::size_t total_parameter_count(const ParameterList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.size();
    return n;
}

std::vector<double> positional_encoding(std::size_t t, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) throw ConfigError("positional encoding size must be even, got " + std::to_string(dim));
    std::vector<double> out(dim);
    const double time = static_cast<double>(t);
    for (std::size_t d = 0; d < dim; ++d) {
        const double angle = time / std::pow(10000.0, static_cast<double>(d) / static_cast<double>(dim));
        out[d] = d % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
    return out;
}

Tensor positional_encoding_rows(std::span<const std::size_t> times, std::size_t dim) {
    std::vector<double> values;
    values.reserve(times.size() * dim);
    for (auto t : times) {
        auto row = positional_encoding(t, dim);
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor::matrix(times.size(), dim, std::move(values));
}

Tensor DropoutContext::apply(const Tensor& x) const {
    if (!training || rate == 0.0) return x;
    return ops::dropout(x, rate, *rng, training);
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, bool with_bias) : in_(in), out_(out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight_ = uniform_parameter({in, out}, bound, rng);
    if (with_bias) bias_ = uniform_parameter({out}, bound, rng);
}

Tensor Linear::operator()(const Tensor& x) const {
    Tensor y = ops::matmul(x, weight_);
    return bias_.defined() ? ops::add_bias(y, bias_) : y;
}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".weight", weight_});
    if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
}

LayerNorm::LayerNorm(std::size_t dim) : gamma_(Tensor::full({dim}, 1.0, true)), beta_(Tensor::zeros({dim}, true)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return ops::layer_norm(x, gamma_, beta_); }

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
}

Embedding::Embedding(std::size_t count, std::size_t dim, std::mt19937_64& rng)
    : table_(uniform_parameter({count, dim}, 1.0 / std::sqrt(static_cast<double>(count)), rng)) {}

Tensor Embedding::operator()(std::span<const std::size_t> index) const {
    for (std::size_t i : index)
        if (i >= table_.rows())
            throw LookupError("embedding index " + std::to_string(i) + " out of " + std::to_string(table_.rows()));
    return ops::gather_rows(table_, index);
}

void Embedding::collect(const std::string& prefix, ParameterList& out) const { out.push_back({prefix + ".table", table_}); }

MultiHeadAttention::MultiHeadAttention(std::size_t d_model, std::size_t heads, std::mt19937_64& rng)
    : heads_(heads),
      wq_(d_model, d_model, rng),
      wk_(d_model, d_model, rng),
      wv_(d_model, d_model, rng),
      wo_(d_model, d_model, rng) {
    if (heads == 0 || d_model % heads != 0)
        throw ConfigError("attention heads (" + std::to_string(heads) + ") must divide d_model (" +
                          std::to_string(d_model) + ")");
}

Tensor MultiHeadAttention::operator()(const Tensor& query_in, const Tensor& key_value_in, std::size_t batch,
                                      std::span<const AttentionMask> masks) const {
    Tensor attended = multi_head_attention(wq_(query_in), wk_(key_value_in), wv_(key_value_in), heads_, batch, masks);
    return wo_(attended);
}

void MultiHeadAttention::collect(const std::string& prefix, ParameterList& out) const {
    wq_.collect(prefix + ".q", out);
    wk_.collect(prefix + ".k", out);
    wv_.collect(prefix + ".v", out);
    wo_.collect(prefix + ".o", out);
}

FeedForward::FeedForward(std::size_t d_model, std::size_t inner, std::mt19937_64& rng)
    : in_(d_model, inner, rng), out_(inner, d_model, rng) {}

Tensor FeedForward::operator()(const Tensor& x, const DropoutContext& dropout) const {
    return out_(dropout.apply(ops::relu(in_(x))));
}

void FeedForward::collect(const std::string& prefix, ParameterList& out) const {
    in_.collect(prefix + ".in", out);
    out_.collect(prefix + ".out", out);
}

EncoderLayer::EncoderLayer(std::size_t d_model, std::size_t heads, std::size_t ff_inner, std::mt19937_64& rng)
    : self_attn_(d_model, heads, rng), ff_(d_model, ff_inner, rng), norm1_(d_model), norm2_(d_model) {}

Tensor EncoderLayer::operator()(const Tensor& x, std::size_t batch, std::span<const AttentionMask> masks,
                                const DropoutContext& dropout) const {
    Tensor h = norm1_(ops::add(x, dropout.apply(self_attn_(x, x, batch, masks))));
    return norm2_(ops::add(h, dropout.apply(ff_(h, dropout))));
}

void EncoderLayer::collect(const std::string& prefix, ParameterList& out) const {
    self_attn_.collect(prefix + ".self_attn", out);
    ff_.collect(prefix + ".ff", out);
    norm1_.collect(prefix + ".norm1", out);
    norm2_.collect(prefix + ".norm2", out);
}

DecoderLayer::DecoderLayer(std::size_t d_model, std::size_t heads, std::size_t ff_inner, std::mt19937_64& rng)
    : self_attn_(d_model, heads, rng),
      cross_attn_(d_model, heads, rng),
      ff_(d_model, ff_inner, rng),
      norm1_(d_model),
      norm2_(d_model),
      norm3_(d_model) {}

Tensor DecoderLayer::operator()(const Tensor& x, const Tensor& memory, std::size_t batch,
                                std::span<const AttentionMask> self_masks,
                                std::span<const AttentionMask> cross_masks, const DropoutContext& dropout) const {
    Tensor h = norm1_(ops::add(x, dropout.apply(self_attn_(x, x, batch, self_masks))));
    h = norm2_(ops::add(h, dropout.apply(cross_attn_(h, memory, batch, cross_masks))));
    return norm3_(ops::add(h, dropout.apply(ff_(h, dropout))));
}

void DecoderLayer::collect(const std::string& prefix, ParameterList& out) const {
    self_attn_.collect(prefix + ".self_attn", out);
    cross_attn_.collect(prefix + ".cross_attn", out);
    ff_.collect(prefix + ".ff", out);
    norm1_.collect(prefix + ".norm1", out);
    norm2_.collect(prefix + ".norm2", out);
    norm3_.collect(prefix + ".norm3", out);
}

LstmCell::LstmCell(std::size_t input, std::size_t hidden, std::mt19937_64& rng)
    : hidden_(hidden), input_to_gates_(input, 4 * hidden, rng), hidden_to_gates_(hidden, 4 * hidden, rng, false) {}

LstmState LstmCell::operator()(const Tensor& x, const LstmState& state) const {
    Tensor gates = ops::add(input_to_gates_(x), hidden_to_gates_(state.h));
    Tensor i = ops::sigmoid(ops::slice_cols(gates, 0, hidden_));
    Tensor f = ops::sigmoid(ops::slice_cols(gates, hidden_, hidden_));
    Tensor g = ops::tanh(ops::slice_cols(gates, 2 * hidden_, hidden_));
    Tensor o = ops::sigmoid(ops::slice_cols(gates, 3 * hidden_, hidden_));
    Tensor c = ops::add(ops::mul(f, state.c), ops::mul(i, g));
    Tensor h = ops::mul(o, ops::tanh(c));
    return {h, c};
}

LstmState LstmCell::zero_state(std::size_t batch) const {
    return {Tensor::zeros({batch, hidden_}), Tensor::zeros({batch, hidden_})};
}

void LstmCell::collect(const std::string& prefix, ParameterList& out) const {
    input_to_gates_.collect(prefix + ".ih", out);
    hidden_to_gates_.collect(prefix + ".hh", out);
}

}  // namespace trajlab
