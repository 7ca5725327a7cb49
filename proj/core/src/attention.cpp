#include "trajlab/attention.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "tensor_node.hpp"
#include "trajlab/errors.hpp"

namespace trajlab {

namespace {

void check_rows(std::size_t queries, std::size_t keys, const std::vector<bool>& allowed) {
    for (std::size_t q = 0; q < queries; ++q) {
        bool any = false;
        for (std::size_t k = 0; k < keys && !any; ++k) any = allowed[q * keys + k];
        if (!any) throw MaskError("attention mask row " + std::to_string(q) + " allows no key");
    }
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;
using ConstBlock = Eigen::Map<const RowMatrix, 0, Strided>;
using Block = Eigen::Map<RowMatrix, 0, Strided>;

}  // namespace

AttentionMask::AttentionMask(std::size_t queries, std::size_t keys, std::vector<bool> allowed)
    : queries_(queries), keys_(keys), allowed_(std::move(allowed)) {
    if (queries == 0 || keys == 0) throw MaskError("attention mask extents must be positive");
    if (allowed_.size() != queries * keys)
        throw MaskError("attention mask has " + std::to_string(allowed_.size()) + " entries, expected " +
                        std::to_string(queries * keys));
    check_rows(queries_, keys_, allowed_);
}

AttentionMask AttentionMask::full(std::size_t queries, std::size_t keys) {
    return AttentionMask(queries, keys, std::vector<bool>(queries * keys, true));
}

AttentionMask AttentionMask::causal(std::size_t length) {
    std::vector<bool> allowed(length * length, false);
    for (std::size_t q = 0; q < length; ++q)
        for (std::size_t k = 0; k <= q; ++k) allowed[q * length + k] = true;
    return AttentionMask(length, length, std::move(allowed));
}

AttentionMask AttentionMask::key_padding(std::size_t queries, const std::vector<bool>& key_valid) {
    std::vector<bool> allowed(queries * key_valid.size());
    for (std::size_t q = 0; q < queries; ++q)
        for (std::size_t k = 0; k < key_valid.size(); ++k) allowed[q * key_valid.size() + k] = key_valid[k];
    return AttentionMask(queries, key_valid.size(), std::move(allowed));
}

AttentionMask AttentionMask::operator&(const AttentionMask& other) const {
    if (other.queries_ != queries_ || other.keys_ != keys_) throw MaskError("cannot combine masks of different extents");
    std::vector<bool> allowed(allowed_.size());
    for (std::size_t i = 0; i < allowed.size(); ++i) allowed[i] = allowed_[i] && other.allowed_[i];
    return AttentionMask(queries_, keys_, std::move(allowed));
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask) {
    return multi_head_attention(q, k, v, 1, 1, std::span<const AttentionMask>(&mask, 1));
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                            std::size_t batch, std::span<const AttentionMask> masks,
                            std::vector<double>* weights_out) {
    if (heads == 0 || batch == 0) throw ShapeError("attention: heads and batch must be positive");
    if (q.rows() % batch != 0 || k.rows() % batch != 0)
        throw ShapeError("attention: row counts are not divisible by the batch size");
    if (k.rows() != v.rows()) throw ShapeError("attention: keys and values have different lengths");
    if (q.cols() != k.cols())
        throw ShapeError("attention: query width " + std::to_string(q.cols()) + " differs from key width " +
                         std::to_string(k.cols()));
    if (q.cols() % heads != 0 || v.cols() % heads != 0)
        throw ShapeError("attention: head count must divide the feature widths");
    if (masks.size() != 1 && masks.size() != batch)
        throw MaskError("attention: expected 1 or " + std::to_string(batch) + " masks, got " +
                        std::to_string(masks.size()));

    const std::size_t lq = q.rows() / batch, lk = k.rows() / batch;
    const std::size_t dq = q.cols(), dv = v.cols();
    const std::size_t dk = dq / heads, dvh = dv / heads;
    for (const auto& m : masks)
        if (m.queries() != lq || m.keys() != lk)
            throw ShapeError("attention: mask is " + std::to_string(m.queries()) + "x" + std::to_string(m.keys()) +
                             ", expected " + std::to_string(lq) + "x" + std::to_string(lk));

    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> probs(batch * heads * lq * lk);
    std::vector<double> out(batch * lq * dv);
    auto qv = q.values(), kv = k.values(), vv = v.values();

    for (std::size_t b = 0; b < batch; ++b) {
        const AttentionMask& mask = masks.size() == 1 ? masks[0] : masks[b];
        for (std::size_t h = 0; h < heads; ++h) {
            ConstBlock qb(qv.data() + b * lq * dq + h * dk, lq, dk, Strided(dq));
            ConstBlock kb(kv.data() + b * lk * dq + h * dk, lk, dk, Strided(dq));
            ConstBlock vb(vv.data() + b * lk * dv + h * dvh, lk, dvh, Strided(dv));
            Eigen::Map<RowMatrix> p(probs.data() + ((b * heads + h) * lq) * lk, lq, lk);
            p.noalias() = qb * kb.transpose();
            for (std::size_t i = 0; i < lq; ++i) {
                double mx = neg_inf;
                for (std::size_t j = 0; j < lk; ++j) {
                    double s = mask.allowed(i, j) ? p(i, j) * inv_sqrt : neg_inf;
                    p(i, j) = s;
                    mx = std::max(mx, s);
                }
                double z = 0.0;
                for (std::size_t j = 0; j < lk; ++j) {
                    const double e = p(i, j) == neg_inf ? 0.0 : std::exp(p(i, j) - mx);
                    p(i, j) = e;
                    z += e;
                }
                for (std::size_t j = 0; j < lk; ++j) p(i, j) /= z;
            }
            Block ob(out.data() + b * lq * dv + h * dvh, lq, dvh, Strided(dv));
            ob.noalias() = p * vb;
        }
    }
    if (weights_out) *weights_out = probs;

    return detail::make_result(
        {batch * lq, dv}, std::move(out), {q, k, v},
        [=, probs = std::move(probs)](detail::Node& self) {
            detail::Node& pq = *self.parents[0];
            detail::Node& pk = *self.parents[1];
            detail::Node& pv = *self.parents[2];
            RowMatrix dp(lq, lk), ds(lq, lk);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t h = 0; h < heads; ++h) {
                    Eigen::Map<const RowMatrix> p(probs.data() + ((b * heads + h) * lq) * lk, lq, lk);
                    ConstBlock go(self.grad.data() + b * lq * dv + h * dvh, lq, dvh, Strided(dv));
                    ConstBlock qb(pq.value.data() + b * lq * dq + h * dk, lq, dk, Strided(dq));
                    ConstBlock kb(pk.value.data() + b * lk * dq + h * dk, lk, dk, Strided(dq));
                    ConstBlock vb(pv.value.data() + b * lk * dv + h * dvh, lk, dvh, Strided(dv));
                    if (pv.requires_grad) {
                        Block gv(pv.grad.data() + b * lk * dv + h * dvh, lk, dvh, Strided(dv));
                        gv.noalias() += p.transpose() * go;
                    }
                    if (!pq.requires_grad && !pk.requires_grad) continue;
                    dp.noalias() = go * vb.transpose();
                    for (std::size_t i = 0; i < lq; ++i) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < lk; ++j) dot += dp(i, j) * p(i, j);
                        for (std::size_t j = 0; j < lk; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot) * inv_sqrt;
                    }
                    if (pq.requires_grad) {
                        Block gq(pq.grad.data() + b * lq * dq + h * dk, lq, dk, Strided(dq));
                        gq.noalias() += ds * kb;
                    }
                    if (pk.requires_grad) {
                        Block gk(pk.grad.data() + b * lk * dq + h * dk, lk, dk, Strided(dq));
                        gk.noalias() += ds.transpose() * qb;
                    }
                }
            }
        });
}

}  // namespace trajlab
