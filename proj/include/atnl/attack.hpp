#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atnl/model.hpp"
#include "atnl/tensor.hpp"

namespace atnl {

// L-inf PGD parameters. Feature domain is always [0,1]^d.
struct AttackConfig {
    double epsilon = 0.031;
    double alpha = 0.007;
    int max_steps = 10;
    bool random_start = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct KappaRecord {
    std::size_t sample_index = 0;
    int kappa = 0;
    bool saturated = false;  // never misclassified within the step budget
};

// Elementwise sign with sign(0) = 0.
Tensor sign(const Tensor& g);

// Per-coordinate clamp to [x0 - eps, x0 + eps], then to [0, 1].
Tensor project(const Tensor& x, const Tensor& x0, double epsilon);

// max_steps iterations of x <- project(x + alpha * sign(grad_x loss)).
// With random_start, the start point is x plus uniform noise in
// [-eps, eps] projected into the domain; the noise stream for a sample is
// derived from (cfg.seed, sample_index) so batched and single-sample runs
// agree bit-for-bit. The result always satisfies |result - x|_inf <= eps.
Tensor pgd_attack(const Model& model, const Tensor& x, int y, const AttackConfig& cfg,
                  std::size_t sample_index = 0);
Tensor pgd_attack_batch(const Model& model, const Tensor& x, std::span<const int> y,
                        const AttackConfig& cfg, std::span<const std::size_t> sample_indices = {});

// Geometry value: the least t in {0, ..., max_steps} such that the
// prediction at iterate t disagrees with y. t = 0 is the (possibly
// randomized) start point, so a natural misclassification gives kappa = 0.
KappaRecord geometry_value(const Model& model, const Tensor& x, int y, const AttackConfig& cfg,
                           std::size_t sample_index = 0);
std::vector<KappaRecord> geometry_value_batch(const Model& model, const Tensor& x,
                                              std::span<const int> y, const AttackConfig& cfg,
                                              std::span<const std::size_t> sample_indices = {});

} // namespace atnl
