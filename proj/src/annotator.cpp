#include "atnl/annotator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "atnl/rng.hpp"

namespace atnl {

void AnnotatorConfig::validate() const {
    base.validate();
    if (base.mode != TrainMode::adversarial) {
        throw std::invalid_argument("annotator: base config must be adversarial");
    }
    if (geometry_threshold < 0) throw std::invalid_argument("annotator: K must be >= 0");
    if (loss_fraction <= 0.0 || loss_fraction >= 1.0) {
        throw std::invalid_argument("annotator: loss_fraction must be in (0,1)");
    }
    if (warmup_epochs < 0 || warmup_epochs >= base.epochs) {
        throw std::invalid_argument("annotator: warmup_epochs must be in [0, epochs)");
    }
}

double select_threshold_L(std::span<const double> batch_losses, double fraction) {
    if (batch_losses.empty()) throw std::invalid_argument("select_threshold_L: empty batch");
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw std::invalid_argument("select_threshold_L: fraction must be in (0,1)");
    }
    const std::size_t n = batch_losses.size();
    // ceil with a tolerance: 0.2 * 10 is 2.0000000000000004 in doubles and
    // must still give k = 2.
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n) - 1e-9) + 0.5);
    if (k >= n) return -std::numeric_limits<double>::infinity();
    std::vector<double> sorted(batch_losses.begin(), batch_losses.end());
    std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end(), std::greater<>());
    return sorted[k];  // (k+1)-th largest
}

namespace {

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

AnnotatorRun robust_annotator_train(Model& model, const NoisyDataset& ds, const AnnotatorConfig& cfg,
                                    const NoisyDataset& test_ds, const TrainHooks* hooks) {
    cfg.validate();
    ds.check_invariants();
    const TrainConfig& base = cfg.base;
    OptimizerState opt = OptimizerState::init(base.optimizer, model);
    AnnotatorRun run;
    run.final_labels = ds.observed;
    std::vector<int>& working = run.final_labels;
    const std::size_t n = ds.size();

    // Metrics are reported against the working labels: the training signal
    // as the algorithm currently sees it.
    NoisyDataset view = ds;

    for (int epoch = 1; epoch <= base.epochs; ++epoch) {
        const double lr = base.optimizer.learning_rate * base.schedule.factor_at(epoch);
        const bool selecting = epoch > cfg.warmup_epochs;

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(base.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        AttackConfig atk = *base.attack;
        atk.seed = derive_seed(base.attack->seed, "attack-epoch", static_cast<std::uint64_t>(epoch));

        int batch_index = 0;
        for (std::size_t begin = 0; begin < n; begin += base.batch_size, ++batch_index) {
            const std::size_t end = std::min(begin + static_cast<std::size_t>(base.batch_size), n);
            std::span<const std::size_t> idx(order.data() + begin, end - begin);
            Tensor xb = gather_rows(ds.features, idx);
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = working[idx[i]];

            if (selecting) {
                // Per-sample loss and geometry value against the current
                // working labels, before this batch's update.
                PerSampleEval nat = per_sample_eval(model, xb, yb);
                AttackConfig probe = atk;
                probe.random_start = false;
                std::vector<KappaRecord> recs = geometry_value_batch(model, xb, yb, probe, idx);
                const double threshold_l = select_threshold_L(nat.losses, cfg.loss_fraction);
                std::vector<int> preds = model.predict(xb);
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    if (recs[i].kappa < cfg.geometry_threshold && nat.losses[i] > threshold_l) {
                        const int new_label = preds[i];
                        if (new_label != yb[i]) {
                            run.relabel_log.push_back({epoch, batch_index, idx[i], yb[i], new_label,
                                                       recs[i].kappa, nat.losses[i]});
                            working[idx[i]] = new_label;
                            yb[i] = new_label;
                        }
                    }
                }
            }

            Tensor adv = pgd_attack_batch(model, xb, yb, atk, idx);
            NodePtr xin = make_constant(std::move(adv));
            std::vector<std::pair<NodePtr, NodePtr>> params;
            NodePtr z = model.forward_graph(xin, &params);
            NodePtr loss = softmax_cross_entropy(z, yb);
            if (!std::isfinite(loss->value[0])) {
                throw std::runtime_error("annotator: non-finite loss in epoch " + std::to_string(epoch) +
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

        view.observed = working;
        for (std::size_t i = 0; i < n; ++i) view.corrupted[i] = view.observed[i] != view.truth[i];

        EpochMetrics em;
        em.epoch = epoch;
        PerSampleEval train_eval = per_sample_eval(model, view.features, view.observed);
        double sum_c = 0, sum_i = 0, loss_c = 0, loss_i = 0;
        std::size_t n_c = 0, n_i = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool hit = train_eval.predictions[i] == view.observed[i];
            if (view.corrupted[i]) {
                sum_i += hit;
                loss_i += train_eval.losses[i];
                ++n_i;
            } else {
                sum_c += hit;
                loss_c += train_eval.losses[i];
                ++n_c;
            }
        }
        if (n_c > 0) {
            em.train_acc_correct = sum_c / static_cast<double>(n_c);
            em.mean_loss_correct = loss_c / static_cast<double>(n_c);
        }
        if (n_i > 0) {
            em.train_acc_incorrect = sum_i / static_cast<double>(n_i);
            em.mean_loss_incorrect = loss_i / static_cast<double>(n_i);
        }
        if (test_ds.size() > 0) {
            PerSampleEval test_eval = per_sample_eval(model, test_ds.features, test_ds.observed);
            double hits = 0;
            for (std::size_t i = 0; i < test_ds.size(); ++i) {
                hits += test_eval.predictions[i] == test_ds.observed[i];
            }
            em.test_acc_natural = hits / static_cast<double>(test_ds.size());
        }
        run.metrics.push_back(em);
        if (hooks && hooks->after_epoch) hooks->after_epoch(epoch, model, opt, em);
    }
    return run;
}

AnnotateOutput annotate(const Model& model, const Tensor& features, double adversarial_ratio,
                        const AttackConfig& attacker, std::span<const int> true_labels_for_eval,
                        std::uint64_t seed) {
    if (adversarial_ratio < 0.0 || adversarial_ratio > 1.0) {
        throw std::invalid_argument("annotate: adversarial_ratio must be in [0,1]");
    }
    attacker.validate();
    const std::size_t u = features.rows();
    if (!true_labels_for_eval.empty() && true_labels_for_eval.size() != u) {
        throw std::invalid_argument("annotate: true label count mismatch");
    }

    AnnotateOutput out;
    out.perturbed.assign(u, 0);
    const std::size_t n_adv =
        static_cast<std::size_t>(std::llround(adversarial_ratio * static_cast<double>(u)));
    Tensor working = features;
    if (n_adv > 0) {
        Rng rng(derive_seed(seed, "annotate.pick"));
        std::vector<std::size_t> chosen = rng.sample_without_replacement(u, n_adv);
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t idx : chosen) out.perturbed[idx] = 1;
        // Attack directions come from the evaluation labels when known.
        std::vector<int> atk_labels(chosen.size());
        if (true_labels_for_eval.empty()) {
            std::vector<int> preds = model.predict(features);
            for (std::size_t i = 0; i < chosen.size(); ++i) atk_labels[i] = preds[chosen[i]];
        } else {
            for (std::size_t i = 0; i < chosen.size(); ++i) {
                atk_labels[i] = true_labels_for_eval[chosen[i]];
            }
        }
        Tensor block = gather_rows(features, chosen);
        Tensor adv = pgd_attack_batch(model, block, atk_labels, attacker, chosen);
        const std::size_t d = features.cols();
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            auto src = adv.row(i);
            for (std::size_t j = 0; j < d; ++j) working.at(chosen[i], j) = src[j];
        }
    }

    std::vector<int> assigned = model.predict(working);
    AttackConfig probe = attacker;
    probe.random_start = false;
    std::vector<KappaRecord> recs = geometry_value_batch(model, working, assigned, probe);

    out.results.resize(u);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < u; ++i) {
        out.results[i] = {i, assigned[i], recs[i].kappa, recs[i].kappa};
        if (!true_labels_for_eval.empty() && assigned[i] == true_labels_for_eval[i]) ++hits;
    }
    if (!true_labels_for_eval.empty()) {
        out.accuracy = static_cast<double>(hits) / static_cast<double>(u);
    }
    return out;
}

std::vector<ConfidenceBin> confidence_bins(std::span<const AnnotationResult> results,
                                           std::span<const int> true_labels, int max_kappa) {
    if (results.size() != true_labels.size()) {
        throw std::invalid_argument("confidence_bins: length mismatch");
    }
    std::vector<ConfidenceBin> bins(static_cast<std::size_t>(max_kappa) + 1);
    std::vector<std::size_t> correct(bins.size(), 0);
    for (std::size_t b = 0; b < bins.size(); ++b) bins[b].kappa = static_cast<int>(b);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const int k = results[i].kappa;
        if (k < 0 || k > max_kappa) {
            throw std::out_of_range("confidence_bins: kappa " + std::to_string(k) + " outside [0, " +
                                    std::to_string(max_kappa) + "]");
        }
        ++bins[static_cast<std::size_t>(k)].count;
        if (results[i].assigned_label == true_labels[i]) ++correct[static_cast<std::size_t>(k)];
    }
    for (std::size_t b = 0; b < bins.size(); ++b) {
        if (bins[b].count > 0) {
            bins[b].accuracy = static_cast<double>(correct[b]) / static_cast<double>(bins[b].count);
        }
    }
    return bins;
}

} // namespace atnl
