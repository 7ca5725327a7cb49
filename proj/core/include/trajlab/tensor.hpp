#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace trajlab {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
}

/// Dense row-major array of doubles that records the operations producing it
/// so that gradients can be propagated back with `backward`.
///
/// A Tensor is a shared handle: copies alias the same storage. Operations treat
/// every tensor as a matrix whose row count is the product of all leading
/// extents and whose column count is the last extent.
class Tensor {
   public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const;
    /// Mutable view of the values. Only meaningful on leaves (parameters, inputs).
    std::span<double> mutable_values();

    bool requires_grad() const;
    /// Gradient accumulator; empty when the tensor does not require gradients.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    double item() const;
    double at(std::size_t row, std::size_t col) const;
    bool is_leaf() const;

    /// Value copy with no history and no gradient.
    Tensor detach() const;

    const detail::Node* node() const noexcept { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const noexcept { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

   private:
    std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients are accumulated into every
/// tensor that requires them; callers zero parameter gradients between steps.
void backward(const Tensor& loss);

bool grad_enabled() noexcept;

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    bool previous_;
};

}  // namespace trajlab
