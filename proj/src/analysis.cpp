#include "atnl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "atnl/rng.hpp"
#include "atnl/training.hpp"

namespace atnl {

namespace {

double row_entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

} // namespace

double neighborhood_entropy(const Model& model, const Tensor& points, const EntropyProbe& probe,
                            std::span<const int> labels) {
    if (points.rows() == 0) throw std::invalid_argument("neighborhood_entropy: no points");
    if (probe.n_samples < 1) throw std::invalid_argument("neighborhood_entropy: n_samples must be >= 1");
    const std::size_t k = points.rows(), d = points.cols();
    const std::size_t m = static_cast<std::size_t>(probe.n_samples);

    std::vector<int> attack_labels;
    if (probe.direction == ProbeDirection::adversarial) {
        if (labels.empty()) {
            attack_labels = model.predict(points);
        } else if (labels.size() != k) {
            throw std::invalid_argument("neighborhood_entropy: label count mismatch");
        } else {
            attack_labels.assign(labels.begin(), labels.end());
        }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        Tensor variants({m, d});
        auto vp = variants.data();
        auto center = points.row(i);
        if (probe.direction == ProbeDirection::random) {
            Rng rng(derive_seed(probe.seed, "entropy.random", i));
            for (std::size_t s = 0; s < m; ++s) {
                for (std::size_t j = 0; j < d; ++j) {
                    const double lo = std::max(0.0, center[j] - probe.epsilon);
                    const double hi = std::min(1.0, center[j] + probe.epsilon);
                    vp[s * d + j] = rng.uniform(lo, hi);
                }
            }
        } else {
            // One-step signed-gradient variants from per-draw random starts.
            AttackConfig atk;
            atk.epsilon = probe.epsilon;
            atk.alpha = probe.epsilon;
            atk.max_steps = 1;
            atk.random_start = true;
            atk.seed = derive_seed(probe.seed, "entropy.adversarial", i);
            Tensor reps({m, d});
            auto rp = reps.data();
            for (std::size_t s = 0; s < m; ++s) {
                for (std::size_t j = 0; j < d; ++j) rp[s * d + j] = center[j];
            }
            std::vector<int> ys(m, attack_labels[i]);
            std::vector<std::size_t> draw_ids(m);
            std::iota(draw_ids.begin(), draw_ids.end(), 0);
            variants = pgd_attack_batch(model, reps, ys, atk, draw_ids);
        }
        Tensor probs = kernels::softmax_rows(model.logits(variants));
        for (std::size_t s = 0; s < m; ++s) total += row_entropy(probs.row(s));
    }
    return total / static_cast<double>(k * m);
}

std::vector<SampleRecord> kappa_loss_table(const Model& model, const NoisyDataset& ds,
                                           const AttackConfig& cfg) {
    const std::size_t n = ds.size();
    std::vector<SampleRecord> table(n);
    PerSampleEval nat = per_sample_eval(model, ds.features, ds.observed);
    std::vector<KappaRecord> recs = geometry_value_batch(model, ds.features, ds.observed, cfg);
    std::vector<double> losses(n), kappas(n);
    for (std::size_t i = 0; i < n; ++i) {
        losses[i] = nat.losses[i];
        kappas[i] = static_cast<double>(recs[i].kappa);
    }
    std::vector<double> loss_norm = minmax_normalize(losses);
    std::vector<double> kappa_norm = minmax_normalize(kappas);
    for (std::size_t i = 0; i < n; ++i) {
        table[i].index = i;
        table[i].observed = ds.observed[i];
        table[i].truth = ds.truth[i];
        table[i].corrupted = ds.corrupted[i] != 0;
        table[i].loss = losses[i];
        table[i].loss_norm = loss_norm[i];
        table[i].kappa = recs[i].kappa;
        table[i].kappa_norm = kappa_norm[i];
        table[i].predicted = nat.predictions[i];
    }
    return table;
}

double separability_auroc(std::span<const double> scores, std::span<const std::uint8_t> is_corrupted,
                          Orientation orientation) {
    if (scores.size() != is_corrupted.size()) {
        throw std::invalid_argument("separability_auroc: length mismatch");
    }
    std::size_t n1 = 0;
    for (auto c : is_corrupted) n1 += c != 0;
    const std::size_t n0 = scores.size() - n1;
    if (n1 == 0 || n0 == 0) {
        throw std::invalid_argument("separability_auroc: both classes must be nonempty");
    }
    // Average ranks over oriented scores; U statistic from the corrupted
    // group's rank sum.
    std::vector<double> oriented(scores.begin(), scores.end());
    if (orientation == Orientation::low_score_means_corrupted) {
        for (auto& s : oriented) s = -s;
    }
    std::vector<std::size_t> order(oriented.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (oriented[a] != oriented[b]) return oriented[a] < oriented[b];
        return a < b;
    });
    std::vector<double> rank(oriented.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && oriented[order[j + 1]] == oriented[order[i]]) ++j;
        const double avg_rank = static_cast<double>(i + j) / 2.0 + 1.0;  // 1-based
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg_rank;
        i = j + 1;
    }
    double rank_sum = 0.0;
    for (std::size_t t = 0; t < oriented.size(); ++t) {
        if (is_corrupted[t]) rank_sum += rank[t];
    }
    const double u = rank_sum - static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
    return u / (static_cast<double>(n1) * static_cast<double>(n0));
}

std::vector<std::size_t> rank_typical_rare(std::span<const SampleRecord> table) {
    if (table.empty()) throw std::invalid_argument("rank_typical_rare: empty table");
    std::vector<std::size_t> pos(table.size());
    std::iota(pos.begin(), pos.end(), 0);
    std::sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
        if (table[a].kappa != table[b].kappa) return table[a].kappa > table[b].kappa;
        if (table[a].loss != table[b].loss) return table[a].loss < table[b].loss;
        return table[a].index < table[b].index;
    });
    std::vector<std::size_t> out(table.size());
    for (std::size_t t = 0; t < pos.size(); ++t) out[t] = table[pos[t]].index;
    return out;
}

std::vector<HistogramRow> histogram64(std::span<const double> values,
                                      std::span<const std::uint8_t> is_corrupted) {
    if (values.size() != is_corrupted.size()) {
        throw std::invalid_argument("histogram64: length mismatch");
    }
    constexpr std::size_t kBins = 64;
    std::vector<HistogramRow> bins(kBins);
    for (std::size_t b = 0; b < kBins; ++b) {
        bins[b].bin_low = static_cast<double>(b) / kBins;
        bins[b].bin_high = static_cast<double>(b + 1) / kBins;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = std::clamp(values[i], 0.0, 1.0);
        std::size_t b = std::min(static_cast<std::size_t>(v * kBins), kBins - 1);
        if (is_corrupted[i]) {
            ++bins[b].count_incorrect;
        } else {
            ++bins[b].count_correct;
        }
    }
    return bins;
}

} // namespace atnl
