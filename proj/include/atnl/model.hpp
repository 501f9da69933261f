#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "atnl/autodiff.hpp"
#include "atnl/tensor.hpp"

namespace atnl {

// Fully connected classifier: affine layers with ReLU between them and
// identity at the output. The last layer width is the class count.
struct Model {
    std::vector<std::size_t> layer_sizes;
    std::vector<Tensor> weights;  // per layer, [d_in, d_out]
    std::vector<Tensor> biases;   // per layer, [d_out]

    // Weights drawn uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases zero.
    // Bit-reproducible per seed.
    static Model mlp_new(std::span<const std::size_t> sizes, std::uint64_t seed);

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t class_count() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }

    // Plain forward (no graph). X is [n, input_dim]; returns logits [n, C].
    Tensor logits(const Tensor& x) const;

    // Graph forward. When param_nodes is non-null the parameters are leaves
    // whose gradients backward() will fill; otherwise they are constants
    // (the attack path, where only the input gradient is wanted).
    NodePtr forward_graph(const NodePtr& x,
                          std::vector<std::pair<NodePtr, NodePtr>>* param_nodes = nullptr) const;

    // Argmax over logits; ties break to the lowest class index.
    int predict_one(std::span<const double> x) const;
    std::vector<int> predict(const Tensor& x) const;
};

int argmax_row(std::span<const double> row);

// Gradient of the scalar cross-entropy loss w.r.t. the input; parameters are
// treated as constants and left untouched. x may be [d] or [1, d].
Tensor input_gradient(const Model& model, const Tensor& x, int y);

// Batched variant: gradient of the batch-mean loss w.r.t. X[n, d]. Row i is
// (1/n) times the gradient of sample i's own loss, so per-coordinate signs
// match the single-sample gradients exactly.
Tensor input_gradient_batch(const Model& model, const Tensor& x, std::span<const int> y);

// Per-parameter gradients in the same layout as Model::weights/biases.
struct ParamGrads {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};

enum class OptKind { sgd_momentum, adam };

struct OptimizerSpec {
    OptKind kind = OptKind::sgd_momentum;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    void validate() const;
};

// Piecewise-constant decay: at epoch e the factor is the product of the
// multipliers of all milestones with milestone epoch <= e. Lookup is a pure
// function of the epoch, so re-applying it is idempotent.
struct LrSchedule {
    std::vector<std::pair<int, double>> milestones;  // (epoch, multiplier), epochs strictly increasing

    void validate() const;
    double factor_at(int epoch) const;
};

struct OptimizerState {
    OptimizerSpec spec;
    long step_count = 0;
    std::vector<Tensor> m_w, m_b;  // momentum / first moment
    std::vector<Tensor> v_w, v_b;  // second moment (adam only)

    static OptimizerState init(const OptimizerSpec& spec, const Model& model);
};

// One update with the given effective learning rate. Gradients must
// shape-match the parameters.
void optimizer_step(OptimizerState& state, Model& model, const ParamGrads& grads,
                    std::optional<double> lr_override = std::nullopt);

} // namespace atnl
