#include "atnl/training.hpp"

#include <cmath>
#include <stdexcept>

#include "atnl/rng.hpp"

namespace atnl {

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    optimizer.validate();
    schedule.validate();
    if (mode == TrainMode::adversarial) {
        if (!attack) throw std::invalid_argument("train: adversarial mode requires an attack config");
        attack->validate();
    } else if (attack) {
        throw std::invalid_argument("train: attack config given for standard mode");
    }
    if (eval_attack) eval_attack->validate();
    if (robust_eval_every < 0) throw std::invalid_argument("train: robust_eval_every must be >= 0");
}

AttackConfig default_eval_attack(double epsilon, std::uint64_t seed) {
    AttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.alpha = epsilon / 4.0;
    cfg.max_steps = 20;
    cfg.random_start = true;
    cfg.seed = seed;
    return cfg;
}

PerSampleEval per_sample_eval(const Model& model, const Tensor& features, std::span<const int> labels) {
    const std::size_t n = features.rows(), d = features.cols();
    const std::size_t chunk = 512;
    PerSampleEval out;
    out.losses.resize(n);
    out.predictions.resize(n);
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t end = std::min(begin + chunk, n);
        Tensor block({end - begin, d},
                     std::vector<double>(features.data().begin() + begin * d,
                                         features.data().begin() + end * d));
        Tensor z = model.logits(block);
        const std::size_t c = z.cols();
        for (std::size_t i = 0; i < end - begin; ++i) {
            auto row = z.row(i);
            out.predictions[begin + i] = argmax_row(row);
            double mx = row[0];
            for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
            out.losses[begin + i] =
                std::log(sum) + mx - row[static_cast<std::size_t>(labels[begin + i])];
        }
    }
    return out;
}

namespace {

// Mean accuracy / loss / kappa per corruption group, in ascending sample
// index order.
struct GroupMeans {
    std::optional<double> correct, incorrect;
};

template <typename Value>
GroupMeans group_means(const std::vector<std::uint8_t>& corrupted, Value value) {
    double sum_c = 0.0, sum_i = 0.0;
    std::size_t n_c = 0, n_i = 0;
    for (std::size_t i = 0; i < corrupted.size(); ++i) {
        if (corrupted[i]) {
            sum_i += value(i);
            ++n_i;
        } else {
            sum_c += value(i);
            ++n_c;
        }
    }
    GroupMeans g;
    if (n_c > 0) g.correct = sum_c / static_cast<double>(n_c);
    if (n_i > 0) g.incorrect = sum_i / static_cast<double>(n_i);
    return g;
}

Tensor gather_rows(const Tensor& features, std::span<const std::size_t> indices) {
    const std::size_t d = features.cols();
    std::vector<double> data(indices.size() * d);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto row = features.row(indices[i]);
        std::copy(row.begin(), row.end(), data.begin() + i * d);
    }
    return Tensor({indices.size(), d}, std::move(data));
}

} // namespace

std::vector<EpochMetrics> train(Model& model, const NoisyDataset& train_ds, const TrainConfig& cfg,
                                const NoisyDataset& test_ds, const TrainHooks* hooks) {
    cfg.validate();
    train_ds.check_invariants();
    if (train_ds.feature_dim() != model.input_dim()) {
        throw std::invalid_argument("train: dataset dimension " + std::to_string(train_ds.feature_dim()) +
                                    " vs model input " + std::to_string(model.input_dim()));
    }
    OptimizerState opt = OptimizerState::init(cfg.optimizer, model);
    std::vector<EpochMetrics> metrics;
    const std::size_t n = train_ds.size();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.optimizer.learning_rate * cfg.schedule.factor_at(epoch);

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(begin + cfg.batch_size, n);
            std::span<const std::size_t> idx(order.data() + begin, end - begin);
            Tensor xb = gather_rows(train_ds.features, idx);
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = train_ds.observed[idx[i]];

            if (cfg.mode == TrainMode::adversarial) {
                AttackConfig atk = *cfg.attack;
                atk.seed = derive_seed(atk.seed, "attack-epoch", static_cast<std::uint64_t>(epoch));
                xb = pgd_attack_batch(model, xb, yb, atk, idx);
            }

            NodePtr xin = make_constant(std::move(xb));
            std::vector<std::pair<NodePtr, NodePtr>> params;
            NodePtr z = model.forward_graph(xin, &params);
            NodePtr loss = softmax_cross_entropy(z, yb);
            if (!std::isfinite(loss->value[0])) {
                throw std::runtime_error("train: non-finite loss in epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_index));
            }
            backward(loss);
            ParamGrads grads;
            for (auto& [w, b] : params) {
                grads.weights.push_back(std::move(w->grad));
                grads.biases.push_back(std::move(b->grad));
            }
            optimizer_step(opt, model, grads, lr);
        }

        EpochMetrics em;
        em.epoch = epoch;

        PerSampleEval train_eval = per_sample_eval(model, train_ds.features, train_ds.observed);
        GroupMeans acc = group_means(train_ds.corrupted, [&](std::size_t i) {
            return train_eval.predictions[i] == train_ds.observed[i] ? 1.0 : 0.0;
        });
        em.train_acc_correct = acc.correct;
        em.train_acc_incorrect = acc.incorrect;
        GroupMeans lss = group_means(train_ds.corrupted, [&](std::size_t i) { return train_eval.losses[i]; });
        em.mean_loss_correct = lss.correct;
        em.mean_loss_incorrect = lss.incorrect;

        if (cfg.track_kappa && cfg.attack) {
            // Measured without random start so the value is a property of the
            // model and sample alone.
            AttackConfig probe = *cfg.attack;
            probe.random_start = false;
            probe.seed = derive_seed(cfg.seed, "kappa-eval", static_cast<std::uint64_t>(epoch));
            std::vector<KappaRecord> recs =
                geometry_value_batch(model, train_ds.features, train_ds.observed, probe);
            GroupMeans kap = group_means(train_ds.corrupted, [&](std::size_t i) {
                return static_cast<double>(recs[i].kappa);
            });
            em.mean_kappa_correct = kap.correct;
            em.mean_kappa_incorrect = kap.incorrect;
        }

        if (test_ds.size() > 0) {
            PerSampleEval test_eval = per_sample_eval(model, test_ds.features, test_ds.observed);
            std::size_t hits = 0;
            for (std::size_t i = 0; i < test_ds.size(); ++i) {
                hits += test_eval.predictions[i] == test_ds.observed[i];
            }
            em.test_acc_natural = static_cast<double>(hits) / static_cast<double>(test_ds.size());

            const bool robust_now = cfg.eval_attack && cfg.robust_eval_every > 0 &&
                                    (epoch % cfg.robust_eval_every == 0 || epoch == cfg.epochs);
            if (robust_now) {
                EvalResult r = evaluate(model, test_ds, cfg.eval_attack);
                em.test_acc_robust = r.robust_acc;
            }
        }

        metrics.push_back(em);
        if (hooks && hooks->after_epoch) hooks->after_epoch(epoch, model, opt, em);
    }
    return metrics;
}

EvalResult evaluate(const Model& model, const NoisyDataset& ds,
                    const std::optional<AttackConfig>& attack) {
    EvalResult out;
    if (ds.size() == 0) return out;
    PerSampleEval nat = per_sample_eval(model, ds.features, ds.observed);
    GroupMeans acc = group_means(ds.corrupted, [&](std::size_t i) {
        return nat.predictions[i] == ds.observed[i] ? 1.0 : 0.0;
    });
    double hits = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) hits += nat.predictions[i] == ds.observed[i];
    out.standard_acc = hits / static_cast<double>(ds.size());
    out.standard_acc_correct = acc.correct;
    out.standard_acc_incorrect = acc.incorrect;

    if (attack) {
        Tensor adv = pgd_attack_batch(model, ds.features, ds.observed, *attack);
        PerSampleEval rob = per_sample_eval(model, adv, ds.observed);
        GroupMeans racc = group_means(ds.corrupted, [&](std::size_t i) {
            return rob.predictions[i] == ds.observed[i] ? 1.0 : 0.0;
        });
        double rhits = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) rhits += rob.predictions[i] == ds.observed[i];
        out.robust_acc = rhits / static_cast<double>(ds.size());
        out.robust_acc_correct = racc.correct;
        out.robust_acc_incorrect = racc.incorrect;
    }
    return out;
}

} // namespace atnl
