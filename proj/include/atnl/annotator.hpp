#pragma once

#include <optional>
#include <span>
#include <vector>

#include "atnl/training.hpp"

namespace atnl {

struct AnnotatorConfig {
    TrainConfig base;          // adversarial mode
    int warmup_epochs = 0;     // plain AT before selection activates
    int geometry_threshold = 2;   // K: relabel candidates need kappa < K
    double loss_fraction = 0.2;   // defines the per-batch loss threshold L

    void validate() const;
};

struct RelabelEvent {
    int epoch = 0;   // 1-based
    int batch = 0;   // 0-based within the epoch
    std::size_t index = 0;  // dataset index
    int old_label = 0;
    int new_label = 0;
    int kappa = 0;
    double loss = 0.0;
};

struct AnnotatorRun {
    std::vector<EpochMetrics> metrics;
    std::vector<RelabelEvent> relabel_log;
    std::vector<int> final_labels;  // working labels after the last epoch
};

// L such that exactly ceil(fraction * n) samples satisfy loss > L when the
// losses are distinct: the (k+1)-th largest loss, or -inf when k = n. With
// ties at the threshold fewer samples qualify (all equal -> none).
double select_threshold_L(std::span<const double> batch_losses, double fraction);

// Adversarial training with per-batch suspect-label correction: a sample
// with kappa < K and loss > L gets its working label overwritten by the
// model's prediction before the batch's adversarial examples are generated.
// Working labels persist across epochs.
AnnotatorRun robust_annotator_train(Model& model, const NoisyDataset& ds, const AnnotatorConfig& cfg,
                                    const NoisyDataset& test_ds, const TrainHooks* hooks = nullptr);

struct AnnotationResult {
    std::size_t sample_index = 0;
    int assigned_label = 0;
    int kappa = 0;
    int confidence_bin = 0;  // raw kappa value
};

struct AnnotateOutput {
    std::vector<AnnotationResult> results;
    std::vector<std::uint8_t> perturbed;
    std::optional<double> accuracy;  // vs true labels when provided
};

// Labels unlabeled points with argmax f(x) and measures each point's kappa
// against its assigned label. A seeded fraction of the points is first
// replaced by PGD attacks against this model (using the evaluation labels
// when given, else the model's own predictions).
AnnotateOutput annotate(const Model& model, const Tensor& features, double adversarial_ratio,
                        const AttackConfig& attacker, std::span<const int> true_labels_for_eval,
                        std::uint64_t seed);

struct ConfidenceBin {
    int kappa = 0;
    std::size_t count = 0;
    std::optional<double> accuracy;  // absent for empty bins
};

// One bin per kappa value in [0, max_kappa].
std::vector<ConfidenceBin> confidence_bins(std::span<const AnnotationResult> results,
                                           std::span<const int> true_labels, int max_kappa);

} // namespace atnl
