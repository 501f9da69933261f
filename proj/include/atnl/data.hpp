#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atnl/tensor.hpp"

namespace atnl {

// Raised for malformed dataset files and invalid run configuration; the CLI
// maps it to exit code 2.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Features in [0,1]^d plus observed (possibly corrupted) labels alongside
// the ground truth used for evaluation only.
struct NoisyDataset {
    Tensor features;                  // [n, d]
    std::vector<int> observed;        // training signal
    std::vector<int> truth;           // ground truth
    std::vector<std::uint8_t> corrupted;  // observed[i] != truth[i]
    int class_count = 0;

    std::size_t size() const { return observed.size(); }
    std::size_t feature_dim() const { return features.cols(); }
    std::size_t corrupted_count() const;
    void check_invariants() const;
};

enum class NoiseKind { symmetric, pair };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double rate = 0.0;
    std::uint64_t seed = 0;
};

// n points uniform in (0,1)^2, label 1 iff y-coordinate > x-coordinate (a
// fixed separable rule), then flip_count labels flipped uniformly without
// replacement.
NoisyDataset synth_binary(std::size_t n, std::size_t flip_count, std::uint64_t seed);

// IDX-format image/label pair. Pixels scaled by 1/255. Draws a uniform
// random subset of subset_size (subset_size == count gives a permutation of
// the whole set). Labels are taken as ground truth; corruption flags start
// false.
NoisyDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                            std::size_t subset_size, std::uint64_t seed);

// Symmetric: each label flips with probability rate to one of the other
// C-1 classes uniformly. Pair: flips with probability rate to (y+1) mod C.
// Features and true labels are preserved; corruption flags recomputed.
NoisyDataset inject_noise(const NoisyDataset& ds, const NoiseSpec& spec);

// (v - min) / (max - min); all zeros when max == min.
std::vector<double> minmax_normalize(std::span<const double> values);

const char* noise_kind_name(NoiseKind k);

} // namespace atnl
