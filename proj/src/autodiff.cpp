#include "atnl/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace atnl {

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
    auto node = std::make_shared<Node>();
    node->grad = Tensor::zeros(value.shape());
    node->value = std::move(value);
    for (const auto& p : parents) {
        if (p->requires_grad) {
            node->requires_grad = true;
            break;
        }
    }
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
    return node;
}

// Post-order DFS; returns nodes so that every parent appears before any
// node that consumes it.
std::vector<Node*> topo_order(const NodePtr& root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

} // namespace

NodePtr make_leaf(Tensor value) {
    auto node = std::make_shared<Node>();
    node->grad = Tensor::zeros(value.shape());
    node->value = std::move(value);
    node->requires_grad = true;
    return node;
}

NodePtr make_constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->grad = Tensor::zeros(value.shape());
    node->value = std::move(value);
    node->requires_grad = false;
    return node;
}

NodePtr affine(const NodePtr& input, const NodePtr& weights, const NodePtr& bias) {
    const Tensor& x = input->value;
    const Tensor& w = weights->value;
    const Tensor& b = bias->value;
    if (x.rank() != 2 || w.rank() != 2 || x.cols() != w.rows()) {
        throw std::invalid_argument("affine: input " + x.shape_str() + " does not conform with weights " +
                                    w.shape_str());
    }
    if (b.size() != w.cols()) {
        throw std::invalid_argument("affine: bias " + b.shape_str() + " does not conform with weights " +
                                    w.shape_str());
    }
    Tensor out = kernels::add_row_broadcast(kernels::matmul(x, w), b);
    return make_node(std::move(out), {input, weights, bias}, [](Node& self) {
        const NodePtr& in = self.parents[0];
        const NodePtr& wt = self.parents[1];
        const NodePtr& bi = self.parents[2];
        if (in->requires_grad) {
            Tensor gx = kernels::matmul_bt(self.grad, wt->value);
            auto dst = in->grad.data();
            auto src = gx.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        if (wt->requires_grad) {
            Tensor gw = kernels::matmul_at(in->value, self.grad);
            auto dst = wt->grad.data();
            auto src = gw.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        if (bi->requires_grad) {
            Tensor gb = kernels::column_sums(self.grad);
            auto dst = bi->grad.data();
            auto src = gb.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    });
}

NodePtr relu(const NodePtr& input) {
    Tensor out = kernels::relu(input->value);
    return make_node(std::move(out), {input}, [](Node& self) {
        const NodePtr& in = self.parents[0];
        if (!in->requires_grad) return;
        auto dst = in->grad.data();
        auto x = in->value.data();
        auto g = self.grad.data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (x[i] > 0.0) dst[i] += g[i];
        }
    });
}

NodePtr softmax_cross_entropy(const NodePtr& logits, std::span<const int> labels) {
    const Tensor& z = logits->value;
    if (z.rank() != 2) {
        throw std::invalid_argument("softmax_cross_entropy: logits must be rank-2, got " + z.shape_str());
    }
    const std::size_t n = z.rows(), c = z.cols();
    if (labels.size() != n) {
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(n) + " rows");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                                    " out of range at index " + std::to_string(i));
        }
    }
    // loss_i = logsumexp(z_i) - z_i[y_i], stabilized by the row max.
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = z.row(i);
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
        total += std::log(sum) + mx - row[static_cast<std::size_t>(labels[i])];
    }
    Tensor out({1}, {total / static_cast<double>(n)});
    std::vector<int> labels_copy(labels.begin(), labels.end());
    return make_node(std::move(out), {logits}, [labels_copy](Node& self) {
        const NodePtr& lg = self.parents[0];
        if (!lg->requires_grad) return;
        const Tensor probs = kernels::softmax_rows(lg->value);
        const std::size_t n = probs.rows(), c = probs.cols();
        const double upstream = self.grad[0];
        const double inv_n = 1.0 / static_cast<double>(n);
        auto dst = lg->grad.data();
        auto p = probs.data();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                double delta = p[i * c + j];
                if (j == static_cast<std::size_t>(labels_copy[i])) delta -= 1.0;
                dst[i * c + j] += upstream * delta * inv_n;
            }
        }
    });
}

NodePtr sum(const NodePtr& input) {
    double total = 0.0;
    for (double v : input->value.data()) total += v;
    Tensor out({1}, {total});
    return make_node(std::move(out), {input}, [](Node& self) {
        const NodePtr& in = self.parents[0];
        if (!in->requires_grad) return;
        const double g = self.grad[0];
        for (auto& v : in->grad.data()) v += g;
    });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) {
        throw std::invalid_argument("add: shape mismatch " + a->value.shape_str() + " vs " +
                                    b->value.shape_str());
    }
    Tensor out = a->value;
    auto bp = b->value.data();
    auto op = out.data();
    for (std::size_t i = 0; i < op.size(); ++i) op[i] += bp[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        for (int k = 0; k < 2; ++k) {
            const NodePtr& p = self.parents[static_cast<std::size_t>(k)];
            if (!p->requires_grad) continue;
            auto dst = p->grad.data();
            auto g = self.grad.data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
        }
    });
}

NodePtr scale(const NodePtr& a, double c) {
    Tensor out = a->value;
    for (auto& v : out.data()) v *= c;
    return make_node(std::move(out), {a}, [c](Node& self) {
        const NodePtr& p = self.parents[0];
        if (!p->requires_grad) return;
        auto dst = p->grad.data();
        auto g = self.grad.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += c * g[i];
    });
}

void backward(const NodePtr& root) {
    if (root->value.size() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got " + root->value.shape_str());
    }
    if (root->backward_ran) {
        throw std::logic_error("backward: already run on this root; call zero_grad first");
    }
    if (root->requires_grad) {
        std::vector<Node*> order = topo_order(root);
        root->grad[0] = 1.0;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* node = *it;
            if (node->backprop && node->requires_grad) node->backprop(*node);
        }
    }
    root->backward_ran = true;
}

void zero_grad(const NodePtr& root) {
    for (Node* node : topo_order(root)) {
        node->grad.fill(0.0);
        node->backward_ran = false;
    }
}

} // namespace atnl
