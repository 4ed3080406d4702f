#pragma once
#include <cstdint>
#include <vector>

#include "ddss/ggdm.hpp"
#include "ddss/rng.hpp"
#include "ddss/schedule.hpp"
#include "ddss/score_network.hpp"

namespace ddss {

struct SampleBatch {
  tg::Tensor x0;                       // [n x d]
  std::vector<tg::Tensor> trajectory;  // when kept: x_K, ..., x_1, x0 (K+1 entries)
  std::uint64_t seed = 0;
};

// Unrolled sampler on the caller's tape. All noise enters as constants keyed
// by (seed, noise_block + lattice index, sample, dim), so every sampler fed
// the same seed/block consumes identical noise — paired comparisons are
// exact. Score calls are checkpointed when requested.
tg::Value sample_ggdm_on_tape(tg::Tape& tp, const SamplerTable& tbl, const ScoreNetwork& net,
                              std::size_t n, const NoiseStream& rng, std::uint64_t noise_block,
                              bool checkpoint_score, std::vector<tg::Value>* trajectory = nullptr);

SampleBatch sample_ggdm(const ScoreNetwork& net, const SamplerParams& params,
                        const NoiseSchedule& s, std::size_t n, std::uint64_t seed,
                        bool keep_trajectory = false, std::uint64_t noise_block = 0);

// Ancestral sampling on the kept-times subchain; last step emits the
// x0 prediction with no added noise.
SampleBatch sample_ddpm_stride(const ScoreNetwork& net, const NoiseSchedule& s,
                               const std::vector<std::size_t>& stride, std::size_t n,
                               std::uint64_t seed, bool keep_trajectory = false,
                               std::uint64_t noise_block = 0);

// Non-Markovian posterior family; eta scales the subchain DDPM posterior
// stddev (eta = 0 deterministic given x_K, eta = 1 matches DDPM).
SampleBatch sample_ddim(const ScoreNetwork& net, const NoiseSchedule& s,
                        const std::vector<std::size_t>& stride, double eta, std::size_t n,
                        std::uint64_t seed, bool keep_trajectory = false,
                        std::uint64_t noise_block = 0);

// explicit per-transition sigmas (K-1 of them)
SampleBatch sample_ddim_sigma(const ScoreNetwork& net, const NoiseSchedule& s,
                              const std::vector<std::size_t>& stride,
                              const std::vector<double>& sigma, std::size_t n, std::uint64_t seed,
                              bool keep_trajectory = false, std::uint64_t noise_block = 0);

}  // namespace ddss
