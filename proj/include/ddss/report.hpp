#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/dataset.hpp"
#include "ddss/features.hpp"
#include "ddss/ggdm.hpp"
#include "ddss/kid.hpp"
#include "ddss/samplers.hpp"
#include "ddss/schedule.hpp"
#include "ddss/score_network.hpp"

namespace ddss {

// One sampler entry of the evaluation grid. Baselines derive their stride
// from each requested K; a searched sampler carries fixed-K params and only
// accepts its own K.
struct SamplerSpec {
  enum Kind { ddpm, ddim, ggdm };
  std::string name;
  Kind kind = ddpm;
  double eta = 0.0;
  std::string stride = "linear";
  SamplerParams params;
};

struct ReportRow {
  std::string sampler;
  std::size_t K = 0;
  std::uint64_t seed = 0;
  double rbf_mmd = 0.0;
  double kid_val = 0.0;
  double wasserstein2 = 0.0;
  double mode_coverage = 0.0;
};

struct EvalConfig {
  std::size_t n_eval = 2048;
  std::vector<std::size_t> Ks{5};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  KernelKind kernel = KernelKind::linear;
  double coverage_radius = 0.9;
  void validate() const;
};

struct MetricReport {
  std::vector<ReportRow> rows;  // specs x Ks x seeds, in that nesting order
};

// Per (K, seed) every sampler consumes an identical noise stream, so rows are
// paired comparisons. Rows are computed in parallel (DDSS_THREADS caps the
// pool) but their order and values are fixed by the inputs alone.
MetricReport build_report(const ScoreNetwork& net, const NoiseSchedule& s,
                          const std::vector<SamplerSpec>& specs, const EvalConfig& cfg,
                          const FeatureMap& fmap, const Mixture& mix);

void write_report_csv(const std::string& path, const MetricReport& rep);

std::size_t worker_count(std::size_t jobs);  // DDSS_THREADS-capped pool size

}  // namespace ddss
