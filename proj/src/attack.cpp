#include "atnl/attack.hpp"

#include <algorithm>
#include <stdexcept>

#include "atnl/rng.hpp"

namespace atnl {

void AttackConfig::validate() const {
    if (epsilon <= 0.0) throw std::invalid_argument("attack: epsilon must be > 0");
    if (alpha <= 0.0) throw std::invalid_argument("attack: alpha must be > 0");
    if (max_steps < 1) throw std::invalid_argument("attack: max_steps must be >= 1");
}

Tensor sign(const Tensor& g) {
    Tensor out = g;
    for (auto& v : out.data()) v = (v > 0.0) ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    return out;
}

Tensor project(const Tensor& x, const Tensor& x0, double epsilon) {
    if (!x.same_shape(x0)) {
        throw std::invalid_argument("project: shape mismatch " + x.shape_str() + " vs " + x0.shape_str());
    }
    Tensor out = x;
    auto o = out.data();
    auto c = x0.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        double v = std::clamp(o[i], c[i] - epsilon, c[i] + epsilon);
        o[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

namespace {

Tensor as_batch(const Tensor& x) {
    if (x.rank() == 2) return x;
    return Tensor({1, x.size()}, std::vector<double>(x.data().begin(), x.data().end()));
}

Tensor random_start_batch(const Tensor& x0, const AttackConfig& cfg,
                          std::span<const std::size_t> sample_indices) {
    Tensor x = x0;
    const std::size_t n = x.rows(), d = x.cols();
    auto xp = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = sample_indices.empty() ? i : sample_indices[i];
        Rng rng(derive_seed(cfg.seed, "attack.random-start", idx));
        for (std::size_t j = 0; j < d; ++j) {
            xp[i * d + j] += rng.uniform(-cfg.epsilon, cfg.epsilon);
        }
    }
    return project(x, x0, cfg.epsilon);
}

// Shared PGD trajectory. on_iterate(t, x_t, preds_t) is called at t = 0 with
// the start point and after each of the max_steps updates; it returns true
// to stop early. Each iterate is forwarded once: the same graph serves the
// prediction check and, if another step follows, the input gradient.
template <typename Callback>
void pgd_trajectory(const Model& model, const Tensor& x0_in, std::span<const int> y,
                    const AttackConfig& cfg, std::span<const std::size_t> sample_indices,
                    bool need_predictions, Callback on_iterate) {
    cfg.validate();
    const Tensor x0 = as_batch(x0_in);
    const std::size_t n = x0.rows();
    if (y.size() != n) {
        throw std::invalid_argument("pgd: label count " + std::to_string(y.size()) + " vs batch rows " +
                                    std::to_string(n));
    }
    if (!sample_indices.empty() && sample_indices.size() != n) {
        throw std::invalid_argument("pgd: sample_indices length mismatch");
    }
    Tensor x = cfg.random_start ? random_start_batch(x0, cfg, sample_indices) : x0;
    std::vector<int> preds(need_predictions ? n : 0);
    for (int t = 0;; ++t) {
        const bool last = t == cfg.max_steps;
        NodePtr xin, loss;
        if (need_predictions || !last) {
            xin = make_leaf(x);
            NodePtr z = model.forward_graph(xin);
            if (need_predictions) {
                for (std::size_t i = 0; i < n; ++i) preds[i] = argmax_row(z->value.row(i));
            }
            if (!last) loss = softmax_cross_entropy(z, y);
        }
        if (on_iterate(t, x, std::span<const int>(preds)) || last) return;
        backward(loss);
        Tensor step = sign(xin->grad);
        auto xp = x.data();
        auto sp = step.data();
        for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += cfg.alpha * sp[i];
        x = project(x, x0, cfg.epsilon);
    }
}

} // namespace

Tensor pgd_attack_batch(const Model& model, const Tensor& x, std::span<const int> y,
                        const AttackConfig& cfg, std::span<const std::size_t> sample_indices) {
    Tensor result;
    pgd_trajectory(model, x, y, cfg, sample_indices, false,
                   [&](int t, const Tensor& xt, std::span<const int>) {
                       if (t == cfg.max_steps) result = xt;
                       return false;
                   });
    return result;
}

Tensor pgd_attack(const Model& model, const Tensor& x, int y, const AttackConfig& cfg,
                  std::size_t sample_index) {
    const int labels[1] = {y};
    const std::size_t idx[1] = {sample_index};
    Tensor adv = pgd_attack_batch(model, as_batch(x), labels, cfg, idx);
    if (x.rank() == 2) return adv;
    return Tensor({x.size()}, std::vector<double>(adv.data().begin(), adv.data().end()));
}

std::vector<KappaRecord> geometry_value_batch(const Model& model, const Tensor& x,
                                              std::span<const int> y, const AttackConfig& cfg,
                                              std::span<const std::size_t> sample_indices) {
    const std::size_t n = as_batch(x).rows();
    std::vector<KappaRecord> records(n);
    for (std::size_t i = 0; i < n; ++i) {
        records[i].sample_index = sample_indices.empty() ? i : sample_indices[i];
        records[i].kappa = cfg.max_steps;
        records[i].saturated = true;
    }
    std::size_t undecided = n;
    pgd_trajectory(model, x, y, cfg, sample_indices, true,
                   [&](int t, const Tensor&, std::span<const int> preds) {
                       for (std::size_t i = 0; i < n; ++i) {
                           if (!records[i].saturated) continue;
                           if (preds[i] != y[i]) {
                               records[i].kappa = t;
                               records[i].saturated = false;
                               --undecided;
                           }
                       }
                       return undecided == 0;
                   });
    return records;
}

KappaRecord geometry_value(const Model& model, const Tensor& x, int y, const AttackConfig& cfg,
                           std::size_t sample_index) {
    const int labels[1] = {y};
    const std::size_t idx[1] = {sample_index};
    return geometry_value_batch(model, as_batch(x), labels, cfg, idx)[0];
}

} // namespace atnl
