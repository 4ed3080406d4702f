#include "ddss/report.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "ddss/csv.hpp"
#include "ddss/errors.hpp"
#include "ddss/metrics.hpp"

namespace ddss {

void EvalConfig::validate() const {
  if (n_eval < 2) throw ConfigError("eval: n_eval must be >= 2");
  if (n_eval > 2048) throw ConfigError("eval: n_eval capped at 2048 (exact transport)");
  if (Ks.empty()) throw ConfigError("eval: need at least one K");
  if (seeds.empty()) throw ConfigError("eval: need at least one seed");
  for (std::size_t k : Ks)
    if (k == 0) throw ConfigError("eval: K must be positive");
  if (!(coverage_radius > 0.0)) throw ConfigError("eval: coverage radius must be positive");
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("DDSS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError("DDSS_THREADS must be a positive integer");
    n = std::size_t(v);
  }
  if (jobs == 0) jobs = 1;
  return n < jobs ? n : jobs;
}

namespace {

tg::Tensor centers_tensor(const Mixture& mix) {
  return tg::Tensor::from({mix.n_modes(), mix.dim}, mix.centers);
}

tg::Tensor run_sampler(const ScoreNetwork& net, const NoiseSchedule& s, const SamplerSpec& spec,
                       std::size_t K, std::size_t n, std::uint64_t seed) {
  switch (spec.kind) {
    case SamplerSpec::ddpm:
      return sample_ddpm_stride(net, s, stride_timesteps(s.T, K, spec.stride), n, seed).x0;
    case SamplerSpec::ddim:
      return sample_ddim(net, s, stride_timesteps(s.T, K, spec.stride), spec.eta, n, seed).x0;
    case SamplerSpec::ggdm:
      return sample_ggdm(net, spec.params, s, n, seed).x0;
  }
  throw Error("run_sampler: unreachable");
}

}  // namespace

MetricReport build_report(const ScoreNetwork& net, const NoiseSchedule& s,
                          const std::vector<SamplerSpec>& specs, const EvalConfig& cfg,
                          const FeatureMap& fmap, const Mixture& mix) {
  cfg.validate();
  if (specs.empty()) throw ConfigError("eval: need at least one sampler");
  if (fmap.kind == FeatureMap::file_backed)
    throw UsageError(
        "evaluation embeds generated samples; file-backed features cannot — "
        "use identity or rff");
  for (const auto& spec : specs) {
    if (spec.kind == SamplerSpec::ggdm) {
      for (std::size_t k : cfg.Ks)
        if (k != spec.params.K)
          throw ConfigError("eval: sampler '" + spec.name + "' carries K=" +
                            std::to_string(spec.params.K) + " params but the grid asks for K=" +
                            std::to_string(k));
    } else if (spec.stride != "linear" && spec.stride != "quadratic") {
      throw ConfigError("eval: sampler '" + spec.name + "' has unknown stride '" + spec.stride +
                        "'");
    }
  }

  const KernelSpec kspec{cfg.kernel, fmap.out_dim};
  const tg::Tensor centers = centers_tensor(mix);

  struct Job {
    const SamplerSpec* spec;
    std::size_t K;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& spec : specs)
    for (std::size_t K : cfg.Ks)
      for (std::uint64_t seed : cfg.seeds) jobs.push_back({&spec, K, seed});

  MetricReport rep;
  rep.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex fail_mu;

  auto work = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const Job& job = jobs[j];
        NoiseStream real_rng(sub_seed(job.seed, domain_eval_real));
        const tg::Tensor real = sample_mixture(mix, cfg.n_eval, real_rng, 0);
        const tg::Tensor gen =
            run_sampler(net, s, *job.spec, job.K, cfg.n_eval, sub_seed(job.seed, domain_eval_gen));
        ReportRow row;
        row.sampler = job.spec->name;
        row.K = job.K;
        row.seed = job.seed;
        row.rbf_mmd = rbf_mmd(gen, real);
        row.kid_val = kid_unbiased(kspec, apply_features(fmap, gen), apply_features(fmap, real));
        row.wasserstein2 = wasserstein2(gen, real);
        row.mode_coverage = mode_coverage(gen, centers, cfg.coverage_radius);
        rep.rows[j] = std::move(row);
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t workers = worker_count(jobs.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rep;
}

void write_report_csv(const std::string& path, const MetricReport& rep) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rep.rows.size());
  for (const auto& r : rep.rows)
    cells.push_back({r.sampler, std::to_string(r.K), std::to_string(r.seed), fmt_g17(r.rbf_mmd),
                     fmt_g17(r.kid_val), fmt_g17(r.wasserstein2), fmt_g17(r.mode_coverage)});
  write_csv(path, "sampler,K,seed,rbf_mmd,kid_val,wasserstein2,mode_coverage", cells);
}

}  // namespace ddss
