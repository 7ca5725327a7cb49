#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "trajlab/tensor.hpp"

namespace trajlab::detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(Node&)> backward_fn;
};

/// Creates an op result. History is recorded only when grad mode is on and at
/// least one input requires gradients.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn);

inline Node& node_of(const Tensor& t) { return *t.node_ptr(); }

}  // namespace trajlab::detail
