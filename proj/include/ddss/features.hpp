#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/tape.hpp"
#include "ddss/tensor.hpp"

namespace ddss {

// phi(x): identity pass-through, random Fourier features, or precomputed
// per-row feature table.
struct FeatureMap {
  enum Kind { identity, random_fourier, file_backed };
  Kind kind = identity;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  tg::Tensor wt;          // RFF frequencies, stored [d x m/2]
  tg::Tensor phase;       // RFF phases [1 x m/2], zero by default
  tg::Tensor table;       // file_backed rows [count x m]
  double lengthscale = 1.0;
};

FeatureMap make_identity_features(std::size_t d);
// frequencies ~ N(0, 1/lengthscale^2) fixed by seed; m must be even
FeatureMap make_rff_features(std::size_t d, std::size_t m, double lengthscale,
                             std::uint64_t seed);
FeatureMap make_file_features(tg::Tensor table);

double median_pairwise_distance(const tg::Tensor& pts);

// identity/RFF only; file_backed throws UsageError (generated samples carry
// no row index — use identity or rff for them)
tg::Tensor apply_features(const FeatureMap& f, const tg::Tensor& x);
tg::Value apply_features(tg::Tape& tp, const FeatureMap& f, tg::Value x);
// file_backed path: fetch the stored features of the given dataset rows
tg::Tensor lookup_features(const FeatureMap& f, const std::vector<std::size_t>& rows);

}  // namespace ddss
