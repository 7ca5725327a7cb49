#include "trajlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tensor_node.hpp"
#include "trajlab/errors.hpp"

namespace trajlab {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// log(cosh(r)) without overflow.
double log_cosh(double r) {
    const double a = std::abs(r);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace

Tensor l2_loss(const Tensor& pred, std::span<const Vec2> target) {
    if (pred.cols() != 2 || pred.rows() != target.size())
        throw ShapeError("l2_loss: prediction " + shape_string(pred.shape()) + " vs " + std::to_string(target.size()) +
                         " targets");
    const std::size_t n = target.size();
    auto v = pred.values();
    std::vector<double> diff(2 * n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff[2 * i] = v[2 * i] - target[i].x;
        diff[2 * i + 1] = v[2 * i + 1] - target[i].y;
        total += diff[2 * i] * diff[2 * i] + diff[2 * i + 1] * diff[2 * i + 1];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    return detail::make_result({1}, {total * inv_n}, {pred}, [diff = std::move(diff), inv_n](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < diff.size(); ++i) p.grad[i] += self.grad[0] * 2.0 * diff[i] * inv_n;
    });
}

double gaussian_nll(const GaussianParams& g, const Vec2& x) {
    const double dx = (x.x - g.mu.x) / g.sigma.x;
    const double dy = (x.y - g.mu.y) / g.sigma.y;
    const double q = 1.0 - g.rho * g.rho;
    const double z = dx * dx - 2.0 * g.rho * dx * dy + dy * dy;
    return kLog2Pi + std::log(g.sigma.x) + std::log(g.sigma.y) + 0.5 * std::log(q) + z / (2.0 * q);
}

Tensor gaussian_nll_loss(const Tensor& raw, std::span<const Vec2> target) {
    if (raw.cols() != 5 || raw.rows() != target.size())
        throw ShapeError("gaussian_nll_loss: raw " + shape_string(raw.shape()) + " vs " + std::to_string(target.size()) +
                         " targets");
    const std::size_t n = target.size();
    auto v = raw.values();
    std::vector<double> dgrad(5 * n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* o = v.data() + 5 * i;
        const double sx = std::exp(o[2]), sy = std::exp(o[3]);
        const double rho = std::tanh(o[4]);
        // 1 - tanh^2 = sech^2, kept in the log domain for large |r|.
        const double log_q = -2.0 * log_cosh(o[4]);
        const double q = std::exp(log_q);
        const double dx = (target[i].x - o[0]) / sx;
        const double dy = (target[i].y - o[1]) / sy;
        const double z = dx * dx - 2.0 * rho * dx * dy + dy * dy;
        total += kLog2Pi + o[2] + o[3] + 0.5 * log_q + z / (2.0 * q);
        double* d = dgrad.data() + 5 * i;
        d[0] = -(dx - rho * dy) / (q * sx);
        d[1] = -(dy - rho * dx) / (q * sy);
        d[2] = 1.0 + (-dx * dx + rho * dx * dy) / q;
        d[3] = 1.0 + (-dy * dy + rho * dx * dy) / q;
        d[4] = -rho - dx * dy + rho * z / q;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    return detail::make_result({1}, {total * inv_n}, {raw}, [dgrad = std::move(dgrad), inv_n](detail::Node& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < dgrad.size(); ++i) p.grad[i] += self.grad[0] * dgrad[i] * inv_n;
    });
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const std::size_t> target) {
    const std::size_t n = logits.rows(), k = logits.cols();
    if (n != target.size())
        throw ShapeError("cross_entropy_loss: " + std::to_string(n) + " rows vs " + std::to_string(target.size()) +
                         " targets");
    auto v = logits.values();
    std::vector<double> probs(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (target[i] >= k) throw LookupError("cross_entropy_loss: class index out of range");
        const double* row = v.data() + i * k;
        double* p = probs.data() + i * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += (p[c] = std::exp(row[c] - mx));
        for (std::size_t c = 0; c < k; ++c) p[c] /= z;
        total += mx + std::log(z) - row[target[i]];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<std::size_t> tgt(target.begin(), target.end());
    return detail::make_result(
        {1}, {total * inv_n}, {logits}, [probs = std::move(probs), tgt = std::move(tgt), k, inv_n](detail::Node& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            const double g = self.grad[0] * inv_n;
            for (std::size_t i = 0; i < tgt.size(); ++i)
                for (std::size_t c = 0; c < k; ++c)
                    p.grad[i * k + c] += g * (probs[i * k + c] - (c == tgt[i] ? 1.0 : 0.0));
        });
}

}  // namespace trajlab
