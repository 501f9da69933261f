#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atnl/attack.hpp"
#include "atnl/data.hpp"
#include "atnl/model.hpp"

namespace atnl {

// Per-sample joint record of the two stratification measures. *_norm
// columns are min-max normalized over the whole table.
struct SampleRecord {
    std::size_t index = 0;
    int observed = 0;
    int truth = 0;
    bool corrupted = false;
    double loss = 0.0;
    double loss_norm = 0.0;
    int kappa = 0;
    double kappa_norm = 0.0;
    int predicted = 0;
};

enum class ProbeDirection { random, adversarial };

struct EntropyProbe {
    ProbeDirection direction = ProbeDirection::random;
    double epsilon = 0.031;
    int n_samples = 100;
    std::uint64_t seed = 0;
};

// Mean prediction entropy over perturbed neighborhoods, in nats. Random
// mode draws points uniform in the eps-box intersected with [0,1]^d;
// adversarial mode draws one-step PGD variants from random starts. labels
// drive the adversarial direction (the model's own predictions are used if
// empty); random mode ignores them.
double neighborhood_entropy(const Model& model, const Tensor& points, const EntropyProbe& probe,
                            std::span<const int> labels = {});

// Natural per-sample loss and prediction against the observed label, plus
// the geometry value under cfg, with normalized columns.
std::vector<SampleRecord> kappa_loss_table(const Model& model, const NoisyDataset& ds,
                                           const AttackConfig& cfg);

enum class Orientation { low_score_means_corrupted, high_score_means_corrupted };

// Probability that a random corrupted sample's oriented score exceeds a
// random clean one's, ties counted half (Mann-Whitney U / (n1*n0)).
double separability_auroc(std::span<const double> scores, std::span<const std::uint8_t> is_corrupted,
                          Orientation orientation);

// Indices sorted typical-first: kappa descending, ties by loss ascending,
// then by index. kappa = 0 rows land at the rare end.
std::vector<std::size_t> rank_typical_rare(std::span<const SampleRecord> table);

// 64 uniform bins over [0,1] of a normalized column, counts split by the
// corruption flag. Value 1.0 falls in the last bin.
struct HistogramRow {
    double bin_low = 0.0;
    double bin_high = 0.0;
    std::size_t count_correct = 0;
    std::size_t count_incorrect = 0;
};
std::vector<HistogramRow> histogram64(std::span<const double> values,
                                      std::span<const std::uint8_t> is_corrupted);

} // namespace atnl
