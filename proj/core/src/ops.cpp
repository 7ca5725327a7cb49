#include "trajlab/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "tensor_node.hpp"
#include "trajlab/errors.hpp"

namespace trajlab::ops {

using detail::make_result;
using detail::Node;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return {rows, cols}; }

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    auto in = x.values();
    std::vector<double> out(in.size());
    std::transform(in.begin(), in.end(), out.begin(), fwd);
    return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p.grad[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw ShapeError("matmul: inner extents differ " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
    std::vector<double> out(m * n);
    MatMap(out.data(), m, n).noalias() =
        ConstMatMap(a.values().data(), m, k) * ConstMatMap(b.values().data(), k, n);
    return make_result(matrix_shape(m, n), std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        ConstMatMap g(self.grad.data(), m, n);
        if (pa.requires_grad)
            MatMap(pa.grad.data(), m, k).noalias() += g * ConstMatMap(pb.value.data(), k, n).transpose();
        if (pb.requires_grad)
            MatMap(pb.grad.data(), k, n).noalias() += ConstMatMap(pa.value.data(), m, k).transpose() * g;
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (auto& p : self.parents)
            if (p->requires_grad)
                for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i];
            if (pb.requires_grad) pb.grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.value[i];
            if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.value[i];
        }
    });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    const auto rows = x.rows(), cols = x.cols();
    if (bias.size() != cols)
        throw ShapeError("add_bias: bias has " + std::to_string(bias.size()) + " elements, expected " +
                         std::to_string(cols));
    auto xv = x.values(), bv = bias.values();
    std::vector<double> out(xv.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] + bv[c];
    return make_result(x.shape(), std::move(out), {x, bias}, [rows, cols](Node& self) {
        Node& px = *self.parents[0];
        Node& pb = *self.parents[1];
        if (px.requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
        if (pb.requires_grad)
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) pb.grad[c] += self.grad[r * cols + c];
    });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double out) { return out * (1.0 - out); });
}

Tensor tanh(const Tensor& x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Tensor exp(const Tensor& x) {
    return unary(
        x, [](double v) { return std::exp(v); }, [](double, double out) { return out; });
}

Tensor sum(const Tensor& x) {
    auto v = x.values();
    double s = 0.0;
    for (double e : v) s += e;
    return make_result({1}, {s}, {x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (double& g : p.grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
    const auto cols = x.cols();
    if (count == 0 || start + count > x.rows())
        throw ShapeError("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of " + std::to_string(x.rows()) + " rows");
    auto v = x.values();
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(start * cols),
                            v.begin() + static_cast<std::ptrdiff_t>((start + count) * cols));
    return make_result(matrix_shape(count, cols), std::move(out), {x}, [start, cols](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[start * cols + i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
    const auto rows = x.rows(), cols = x.cols();
    if (count == 0 || start + count > cols)
        throw ShapeError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of " + std::to_string(cols) + " columns");
    auto v = x.values();
    std::vector<double> out(rows * count);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * cols + start), count, out.begin() + static_cast<std::ptrdiff_t>(r * count));
    return make_result(matrix_shape(rows, count), std::move(out), {x}, [rows, cols, start, count](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < count; ++c) p.grad[r * cols + start + c] += self.grad[r * count + c];
    });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const auto cols = parts.front().cols();
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
        rows += p.rows();
    }
    std::vector<double> out;
    out.reserve(rows * cols);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return make_result(matrix_shape(rows, cols), std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad)
                for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[offset + i];
            offset += p->value.size();
        }
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const auto rows = parts.front().rows();
    std::size_t cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
        cols += p.cols();
    }
    std::vector<double> out(rows * cols);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const auto pc = p.cols();
        auto v = p.values();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * pc), pc, out.begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
        offset += pc;
    }
    return make_result(matrix_shape(rows, cols), std::move(out), {parts.begin(), parts.end()}, [rows, cols](Node& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            const auto pc = p->shape.back();
            if (p->requires_grad)
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < pc; ++c) p->grad[r * pc + c] += self.grad[r * cols + offset + c];
            offset += pc;
        }
    });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> index) {
    if (index.empty()) throw ShapeError("gather_rows: empty index");
    const auto cols = table.cols(), rows = table.rows();
    auto v = table.values();
    std::vector<double> out(index.size() * cols);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= rows)
            throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of " + std::to_string(rows));
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(index[i] * cols), cols, out.begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    return make_result(matrix_shape(index.size(), cols), std::move(out), {table},
                       [idx = std::move(idx), cols](Node& self) {
                           Node& p = *self.parents[0];
                           if (!p.requires_grad) return;
                           for (std::size_t i = 0; i < idx.size(); ++i)
                               for (std::size_t c = 0; c < cols; ++c) p.grad[idx[i] * cols + c] += self.grad[i * cols + c];
                       });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size())
        throw ShapeError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
    std::vector<double> out(x.values().begin(), x.values().end());
    return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    });
}

Tensor softmax_rows(const Tensor& x) {
    const auto rows = x.rows(), cols = x.cols();
    auto v = x.values();
    std::vector<double> out(v.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = v.data() + r * cols;
        double* o = out.data() + r * cols;
        const double mx = *std::max_element(in, in + cols);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - mx));
        for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
    }
    return make_result(x.shape(), std::move(out), {x}, [rows, cols](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.value.data() + r * cols;
            const double* g = self.grad.data() + r * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
            for (std::size_t c = 0; c < cols; ++c) p.grad[r * cols + c] += y[c] * (g[c] - dot);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const auto rows = x.rows(), cols = x.cols();
    if (gamma.size() != cols || beta.size() != cols) throw ShapeError("layer_norm: affine parameters must have x.cols() elements");
    auto xv = x.values(), gv = gamma.values(), bv = beta.values();
    std::vector<double> out(xv.size());
    std::vector<double> xhat(xv.size());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * cols;
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mu += in[c];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mu) * (in[c] - mu);
        var /= static_cast<double>(cols);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < cols; ++c) {
            xhat[r * cols + c] = (in[c] - mu) * inv_std[r];
            out[r * cols + c] = xhat[r * cols + c] * gv[c] + bv[c];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gamma, beta},
                       [rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                           Node& px = *self.parents[0];
                           Node& pg = *self.parents[1];
                           Node& pb = *self.parents[2];
                           const double n = static_cast<double>(cols);
                           for (std::size_t r = 0; r < rows; ++r) {
                               const double* g = self.grad.data() + r * cols;
                               const double* xh = xhat.data() + r * cols;
                               if (pg.requires_grad)
                                   for (std::size_t c = 0; c < cols; ++c) pg.grad[c] += g[c] * xh[c];
                               if (pb.requires_grad)
                                   for (std::size_t c = 0; c < cols; ++c) pb.grad[c] += g[c];
                               if (!px.requires_grad) continue;
                               double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                               for (std::size_t c = 0; c < cols; ++c) {
                                   const double dxh = g[c] * pg.value[c];
                                   sum_dxh += dxh;
                                   sum_dxh_xh += dxh * xh[c];
                               }
                               for (std::size_t c = 0; c < cols; ++c) {
                                   const double dxh = g[c] * pg.value[c];
                                   px.grad[r * cols + c] += inv_std[r] * (dxh - sum_dxh / n - xh[c] * sum_dxh_xh / n);
                               }
                           }
                       });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
    if (!training || rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> mask(x.size());
    for (double& m : mask) m = unif(rng) < rate ? 0.0 : keep_scale;
    auto v = x.values();
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * mask[i];
    return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * mask[i];
    });
}

}  // namespace trajlab::ops
