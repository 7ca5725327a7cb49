#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trajlab/tensor.hpp"

namespace trajlab {

/// Boolean query x key matrix; true means the query may attend to the key.
/// Construction validates that every query row allows at least one key.
class AttentionMask {
   public:
    AttentionMask(std::size_t queries, std::size_t keys, std::vector<bool> allowed);

    static AttentionMask full(std::size_t queries, std::size_t keys);
    /// Lower-triangular: query i sees keys 0..i.
    static AttentionMask causal(std::size_t length);
    /// Every query sees exactly the keys whose flag is set.
    static AttentionMask key_padding(std::size_t queries, const std::vector<bool>& key_valid);

    std::size_t queries() const noexcept { return queries_; }
    std::size_t keys() const noexcept { return keys_; }
    bool allowed(std::size_t q, std::size_t k) const { return allowed_[q * keys_ + k]; }

    /// Elementwise AND; the result must still leave each row non-empty.
    AttentionMask operator&(const AttentionMask& other) const;

   private:
    std::size_t queries_;
    std::size_t keys_;
    std::vector<bool> allowed_;
};

/// softmax(Q K^T / sqrt(d_k)) V for a single sequence and a single head.
/// Disallowed keys get exactly zero weight.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask);

/// Batched multi-head form of `scaled_dot_attention`.
///
/// `q` holds `batch` stacked sequences of `q.rows() / batch` rows each, `k` and
/// `v` likewise for keys. Columns are split evenly across `heads`. `masks` is
/// either a single mask shared by the batch or one mask per batch element.
/// When `weights_out` is non-null it receives the attention weights laid out
/// as [batch][head][query][key].
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                            std::size_t batch, std::span<const AttentionMask> masks,
                            std::vector<double>* weights_out = nullptr);

}  // namespace trajlab
