#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "atnl/tensor.hpp"

namespace atnl {

// Reverse-mode autodiff over a define-by-run graph. Each forward pass builds
// fresh nodes; backward() walks the graph once in reverse topological order.
struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;                          // same shape as value, zero until backward
    bool requires_grad = false;           // true if this node or any ancestor wants a gradient
    bool backward_ran = false;            // set on the root by backward()
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents
};

// Leaf whose gradient will be populated by backward().
NodePtr make_leaf(Tensor value);
// Leaf treated as a constant; backward() skips it.
NodePtr make_constant(Tensor value);

// value = input[n,d_in] * weights[d_in,d_out] + bias[d_out] per row.
NodePtr affine(const NodePtr& input, const NodePtr& weights, const NodePtr& bias);

// Elementwise max(0, x). Subgradient at exactly 0 is 0.
NodePtr relu(const NodePtr& input);

// Mean over rows of -log softmax(logits)[label], with max-subtraction
// stabilization. Gradient at the logits is (softmax - one_hot) / n.
NodePtr softmax_cross_entropy(const NodePtr& logits, std::span<const int> labels);

// Scalar sum of all entries.
NodePtr sum(const NodePtr& input);

// Elementwise a + b (same shape) and c * a.
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double c);

// Populates gradients of root w.r.t. every reachable node that requires
// them. root must be scalar. A second call on the same root without
// zero_grad() is a state error.
void backward(const NodePtr& root);

// Zeroes gradients and clears the backward flag across the reachable graph.
void zero_grad(const NodePtr& root);

} // namespace atnl
