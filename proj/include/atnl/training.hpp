#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "atnl/attack.hpp"
#include "atnl/data.hpp"
#include "atnl/model.hpp"

namespace atnl {

enum class TrainMode { standard, adversarial };

struct TrainConfig {
    TrainMode mode = TrainMode::standard;
    int epochs = 30;
    int batch_size = 128;
    OptimizerSpec optimizer;
    LrSchedule schedule;
    std::optional<AttackConfig> attack;       // required iff adversarial
    std::optional<AttackConfig> eval_attack;  // robust test evaluation
    int robust_eval_every = 0;                // 0 = never; k = every k epochs and at the end
    bool track_kappa = false;                 // per-epoch group kappa means (costs one GA-PGD sweep)
    std::uint64_t seed = 0;

    void validate() const;
};

// One row of the per-epoch metrics CSV. Group fields are absent when the
// group is empty (noise rate 0 leaves no incorrect samples), robust/kappa
// fields when not measured that epoch.
struct EpochMetrics {
    int epoch = 0;  // 1-based
    std::optional<double> train_acc_correct;
    std::optional<double> train_acc_incorrect;
    std::optional<double> test_acc_natural;
    std::optional<double> test_acc_robust;
    std::optional<double> mean_loss_correct;
    std::optional<double> mean_loss_incorrect;
    std::optional<double> mean_kappa_correct;
    std::optional<double> mean_kappa_incorrect;
};

struct EvalResult {
    double standard_acc = 0.0;
    std::optional<double> robust_acc;
    // Splits by corruption flag, absent when a group is empty.
    std::optional<double> standard_acc_correct, standard_acc_incorrect;
    std::optional<double> robust_acc_correct, robust_acc_incorrect;
};

struct TrainHooks {
    // Called after each epoch's metrics are computed (epoch is 1-based).
    std::function<void(int epoch, const Model&, const OptimizerState&, const EpochMetrics&)> after_epoch;
};

// Mini-batch training of Eq.-style objectives: standard mode fits the
// observed labels on natural data; adversarial mode fits them on per-batch
// PGD perturbations. Shuffle order is a pure function of (seed, epoch).
// Aborts with the offending batch index if the loss goes non-finite.
std::vector<EpochMetrics> train(Model& model, const NoisyDataset& train_ds, const TrainConfig& cfg,
                                const NoisyDataset& test_ds, const TrainHooks* hooks = nullptr);

// Standard accuracy on natural data against observed labels; robust
// accuracy on per-sample PGD outputs when an attack is given. Split by the
// corruption flag when both groups are nonempty.
EvalResult evaluate(const Model& model, const NoisyDataset& ds,
                    const std::optional<AttackConfig>& attack = std::nullopt);

// Forward in fixed-size chunks; returns per-sample cross-entropy losses and
// predictions against the given labels.
struct PerSampleEval {
    std::vector<double> losses;
    std::vector<int> predictions;
};
PerSampleEval per_sample_eval(const Model& model, const Tensor& features, std::span<const int> labels);

// PGD-20 evaluation attack with alpha = epsilon / 4.
AttackConfig default_eval_attack(double epsilon, std::uint64_t seed);

} // namespace atnl
