#pragma once
#include "ddss/tensor.hpp"

namespace ddss {

// median pairwise distance over the pooled points a ∪ b; DomainError when 0
double median_heuristic_bandwidth(const tg::Tensor& a, const tg::Tensor& b);

// unbiased two-sample estimate with k(x,y) = exp(-|x-y|^2 / (2 h^2));
// bandwidth <= 0 selects the pooled median heuristic
double rbf_mmd(const tg::Tensor& a, const tg::Tensor& b, double bandwidth = 0.0);

// exact optimal-assignment transport distance: sqrt(min_pi mean_i |a_i - b_pi(i)|^2);
// needs equal counts, n <= 2048
double wasserstein2(const tg::Tensor& a, const tg::Tensor& b);

// fraction of centers with at least one sample within `radius`
double mode_coverage(const tg::Tensor& samples, const tg::Tensor& centers, double radius);

}  // namespace ddss
