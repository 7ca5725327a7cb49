#pragma once

#include <cstddef>
#include <span>

#include "trajlab/geometry.hpp"
#include "trajlab/models.hpp"
#include "trajlab/tensor.hpp"

namespace trajlab {

/// Mean over rows of the squared Euclidean distance between `pred` [N x 2] and `target`.
Tensor l2_loss(const Tensor& pred, std::span<const Vec2> target);

/// Mean bivariate-normal negative log-likelihood of `target` under the
/// distributions encoded by raw head rows [N x 5] = (m1, m2, s1, s2, r),
/// evaluated in the log domain.
Tensor gaussian_nll_loss(const Tensor& raw, std::span<const Vec2> target);

/// Mean softmax cross-entropy of `logits` [N x K] against class indices.
Tensor cross_entropy_loss(const Tensor& logits, std::span<const std::size_t> target);

/// Scalar NLL of one point; the reference the batched loss is tested against.
double gaussian_nll(const GaussianParams& g, const Vec2& x);

}  // namespace trajlab
