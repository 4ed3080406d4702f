#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/features.hpp"
#include "ddss/ggdm.hpp"
#include "ddss/kid.hpp"
#include "ddss/samplers.hpp"
#include "ddss/schedule.hpp"
#include "ddss/score_network.hpp"

namespace ddss {

struct SearchConfig {
  Family family = Family::ggdm;
  bool learn_time = false;
  std::size_t K = 5;
  std::string stride = "linear";
  std::size_t n = 512;  // generated batch = real minibatch size
  std::size_t steps = 2000;
  double lr = 0.0005;
  KernelKind kernel = KernelKind::linear;
  std::uint64_t seed = 0;
  bool checkpoint_score = true;  // rematerialize score calls during backward
  double init_off_diag = 1e-4;
  void validate() const;
};

struct TraceRow {
  std::size_t step = 0;
  double train_kid = 0.0;
  double val_kid = 0.0;
};

// trace has one row per evaluated parameter state: steps updates plus the
// final state = steps+1 rows. Row s measures params after s updates.
struct SearchResult {
  SamplerParams init_params;
  SamplerParams best_params;   // lowest validation KID along the trace
  SamplerParams final_params;  // after the last update
  std::vector<TraceRow> trace;
  double init_val_kid = 0.0;
  double best_val_kid = 0.0;
  double final_val_kid = 0.0;
  std::size_t best_step = 0;
  bool aborted = false;  // non-finite loss; params frozen at last good state
};

// Gradient search over sampler params against frozen score weights: each step
// draws a fresh real minibatch (epoch-shuffled, without replacement) and a
// fresh generated batch, differentiates the unbiased kernel distance through
// the unrolled sampler, and applies one Adam update. Validation distance is
// measured off-tape against the fixed held-out set.
SearchResult ddss_search(const ScoreNetwork& net, const NoiseSchedule& s,
                         const tg::Tensor& train_data, const tg::Tensor& val_data,
                         const FeatureMap& fmap, const SearchConfig& cfg);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

}  // namespace ddss
