#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trajlab/attention.hpp"
#include "trajlab/tensor.hpp"

namespace trajlab {

struct NamedParameter {
    std::string name;
    Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

std::size_t total_parameter_count(const ParameterList& params);

/// Sinusoidal time stamp: component d is sin(t / 10000^(d/D)) for even d and
/// cos(t / 10000^(d/D)) for odd d. Throws ConfigError when D is odd or zero.
std::vector<double> positional_encoding(std::size_t t, std::size_t dim);
/// Rows of time stamps for the given time indices, as a constant tensor.
Tensor positional_encoding_rows(std::span<const std::size_t> times, std::size_t dim);

/// Dropout settings threaded through a forward pass.
struct DropoutContext {
    double rate = 0.0;
    std::mt19937_64* rng = nullptr;
    bool training = false;

    Tensor apply(const Tensor& x) const;
};

class Linear {
   public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, bool with_bias = true);

    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;

    std::size_t in_features() const noexcept { return in_; }
    std::size_t out_features() const noexcept { return out_; }
    Tensor& weight() noexcept { return weight_; }
    Tensor& bias() noexcept { return bias_; }

   private:
    std::size_t in_ = 0;
    std::size_t out_ = 0;
    Tensor weight_;  // [in x out]
    Tensor bias_;    // [out], undefined when constructed without bias
};

class LayerNorm {
   public:
    LayerNorm() = default;
    explicit LayerNorm(std::size_t dim);

    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;

   private:
    Tensor gamma_;
    Tensor beta_;
};

/// Lookup table mapping class indices to learned vectors.
class Embedding {
   public:
    Embedding() = default;
    Embedding(std::size_t count, std::size_t dim, std::mt19937_64& rng);

    Tensor operator()(std::span<const std::size_t> index) const;
    void collect(const std::string& prefix, ParameterList& out) const;
    const Tensor& table() const noexcept { return table_; }

   private:
    Tensor table_;
};

class MultiHeadAttention {
   public:
    MultiHeadAttention() = default;
    MultiHeadAttention(std::size_t d_model, std::size_t heads, std::mt19937_64& rng);

    Tensor operator()(const Tensor& query_in, const Tensor& key_value_in, std::size_t batch,
                      std::span<const AttentionMask> masks) const;
    void collect(const std::string& prefix, ParameterList& out) const;

   private:
    std::size_t heads_ = 1;
    Linear wq_, wk_, wv_, wo_;
};

class FeedForward {
   public:
    FeedForward() = default;
    FeedForward(std::size_t d_model, std::size_t inner, std::mt19937_64& rng);

    Tensor operator()(const Tensor& x, const DropoutContext& dropout) const;
    void collect(const std::string& prefix, ParameterList& out) const;

   private:
    Linear in_, out_;
};

/// Post-norm Transformer encoder block: self-attention then feed-forward,
/// each wrapped as LayerNorm(x + Dropout(sublayer(x))).
class EncoderLayer {
   public:
    EncoderLayer() = default;
    EncoderLayer(std::size_t d_model, std::size_t heads, std::size_t ff_inner, std::mt19937_64& rng);

    Tensor operator()(const Tensor& x, std::size_t batch, std::span<const AttentionMask> masks,
                      const DropoutContext& dropout) const;
    void collect(const std::string& prefix, ParameterList& out) const;

   private:
    MultiHeadAttention self_attn_;
    FeedForward ff_;
    LayerNorm norm1_, norm2_;
};

/// Post-norm decoder block: masked self-attention, encoder-decoder attention,
/// feed-forward.
class DecoderLayer {
   public:
    DecoderLayer() = default;
    DecoderLayer(std::size_t d_model, std::size_t heads, std::size_t ff_inner, std::mt19937_64& rng);

    Tensor operator()(const Tensor& x, const Tensor& memory, std::size_t batch,
                      std::span<const AttentionMask> self_masks, std::span<const AttentionMask> cross_masks,
                      const DropoutContext& dropout) const;
    void collect(const std::string& prefix, ParameterList& out) const;

   private:
    MultiHeadAttention self_attn_, cross_attn_;
    FeedForward ff_;
    LayerNorm norm1_, norm2_, norm3_;
};

struct LstmState {
    Tensor h;
    Tensor c;
};

/// Standard LSTM cell with gate order (input, forget, cell, output).
class LstmCell {
   public:
    LstmCell() = default;
    LstmCell(std::size_t input, std::size_t hidden, std::mt19937_64& rng);

    LstmState operator()(const Tensor& x, const LstmState& state) const;
    LstmState zero_state(std::size_t batch) const;
    void collect(const std::string& prefix, ParameterList& out) const;
    std::size_t hidden() const noexcept { return hidden_; }

   private:
    std::size_t hidden_ = 0;
    Linear input_to_gates_;
    Linear hidden_to_gates_;
};

}  // namespace trajlab
