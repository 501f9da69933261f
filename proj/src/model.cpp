#include "atnl/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "atnl/rng.hpp"

namespace atnl {

Model Model::mlp_new(std::span<const std::size_t> sizes, std::uint64_t seed) {
    if (sizes.size() < 2) {
        throw std::invalid_argument("mlp_new: need at least input and output layer sizes");
    }
    for (std::size_t s : sizes) {
        if (s == 0) throw std::invalid_argument("mlp_new: zero layer size");
    }
    Model m;
    m.layer_sizes.assign(sizes.begin(), sizes.end());
    Rng rng(derive_seed(seed, "mlp-init"));
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t fan_in = sizes[l], fan_out = sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor w({fan_in, fan_out});
        for (auto& v : w.data()) v = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(Tensor({fan_out}));
    }
    return m;
}

Tensor Model::logits(const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != input_dim()) {
        throw std::invalid_argument("Model::logits: input " + x.shape_str() + " does not match input_dim " +
                                    std::to_string(input_dim()));
    }
    Tensor h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = kernels::add_row_broadcast(kernels::matmul(h, weights[l]), biases[l]);
        if (l + 1 < weights.size()) h = kernels::relu(h);
    }
    return h;
}

NodePtr Model::forward_graph(const NodePtr& x,
                             std::vector<std::pair<NodePtr, NodePtr>>* param_nodes) const {
    NodePtr h = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        NodePtr w, b;
        if (param_nodes) {
            w = make_leaf(weights[l]);
            b = make_leaf(biases[l]);
            param_nodes->emplace_back(w, b);
        } else {
            w = make_constant(weights[l]);
            b = make_constant(biases[l]);
        }
        h = affine(h, w, b);
        if (l + 1 < weights.size()) h = relu(h);
    }
    return h;
}

int argmax_row(std::span<const double> row) {
    int best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) best = static_cast<int>(j);
    }
    return best;
}

int Model::predict_one(std::span<const double> x) const {
    Tensor xin({1, x.size()}, std::vector<double>(x.begin(), x.end()));
    Tensor z = logits(xin);
    return argmax_row(z.row(0));
}

std::vector<int> Model::predict(const Tensor& x) const {
    Tensor z = logits(x);
    std::vector<int> out(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) out[i] = argmax_row(z.row(i));
    return out;
}

Tensor input_gradient_batch(const Model& model, const Tensor& x, std::span<const int> y) {
    NodePtr xin = make_leaf(x);
    NodePtr z = model.forward_graph(xin);
    NodePtr loss = softmax_cross_entropy(z, y);
    backward(loss);
    return xin->grad;
}

Tensor input_gradient(const Model& model, const Tensor& x, int y) {
    Tensor xin = x.rank() == 2 ? x : Tensor({1, x.size()}, std::vector<double>(x.data().begin(), x.data().end()));
    const int labels[1] = {y};
    Tensor g = input_gradient_batch(model, xin, labels);
    return x.rank() == 2 ? g : Tensor({x.size()}, std::vector<double>(g.data().begin(), g.data().end()));
}

void OptimizerSpec::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("optimizer: learning rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("optimizer: momentum in [0,1)");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw std::invalid_argument("optimizer: adam betas in [0,1)");
    }
    if (eps <= 0.0) throw std::invalid_argument("optimizer: eps must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("optimizer: weight decay must be >= 0");
}

void LrSchedule::validate() const {
    int prev = -1;
    for (const auto& [epoch, mult] : milestones) {
        if (epoch <= prev) throw std::invalid_argument("lr schedule: milestone epochs must strictly increase");
        if (mult <= 0.0) throw std::invalid_argument("lr schedule: multipliers must be > 0");
        prev = epoch;
    }
}

double LrSchedule::factor_at(int epoch) const {
    double f = 1.0;
    for (const auto& [e, mult] : milestones) {
        if (e <= epoch) f *= mult;
    }
    return f;
}

OptimizerState OptimizerState::init(const OptimizerSpec& spec, const Model& model) {
    spec.validate();
    OptimizerState st;
    st.spec = spec;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        st.m_w.emplace_back(Tensor::zeros(model.weights[l].shape()));
        st.m_b.emplace_back(Tensor::zeros(model.biases[l].shape()));
        if (spec.kind == OptKind::adam) {
            st.v_w.emplace_back(Tensor::zeros(model.weights[l].shape()));
            st.v_b.emplace_back(Tensor::zeros(model.biases[l].shape()));
        }
    }
    return st;
}

namespace {

void sgd_update(std::span<double> theta, std::span<const double> grad, std::span<double> mom,
                double lr, double mu, double wd) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double g = grad[i] + wd * theta[i];
        mom[i] = mu * mom[i] + g;
        theta[i] -= lr * mom[i];
    }
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, double lr, double b1, double b2, double eps, double wd,
                 double bias1, double bias2) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double g = grad[i] + wd * theta[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        double mhat = m[i] / bias1;
        double vhat = v[i] / bias2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

void optimizer_step(OptimizerState& state, Model& model, const ParamGrads& grads,
                    std::optional<double> lr_override) {
    if (grads.weights.size() != model.weights.size() || grads.biases.size() != model.biases.size()) {
        throw std::invalid_argument("optimizer_step: gradient layer count mismatch");
    }
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        if (!grads.weights[l].same_shape(model.weights[l]) || !grads.biases[l].same_shape(model.biases[l])) {
            throw std::invalid_argument("optimizer_step: gradient shape mismatch at layer " + std::to_string(l));
        }
    }
    const OptimizerSpec& s = state.spec;
    const double lr = lr_override.value_or(s.learning_rate);
    state.step_count += 1;
    if (s.kind == OptKind::sgd_momentum) {
        for (std::size_t l = 0; l < model.weights.size(); ++l) {
            sgd_update(model.weights[l].data(), grads.weights[l].data(), state.m_w[l].data(), lr,
                       s.momentum, s.weight_decay);
            sgd_update(model.biases[l].data(), grads.biases[l].data(), state.m_b[l].data(), lr,
                       s.momentum, s.weight_decay);
        }
    } else {
        const double bias1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step_count));
        const double bias2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step_count));
        for (std::size_t l = 0; l < model.weights.size(); ++l) {
            adam_update(model.weights[l].data(), grads.weights[l].data(), state.m_w[l].data(),
                        state.v_w[l].data(), lr, s.beta1, s.beta2, s.eps, s.weight_decay, bias1, bias2);
            adam_update(model.biases[l].data(), grads.biases[l].data(), state.m_b[l].data(),
                        state.v_b[l].data(), lr, s.beta1, s.beta2, s.eps, s.weight_decay, bias1, bias2);
        }
    }
}

} // namespace atnl
