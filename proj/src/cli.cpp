#include "ddss/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddss/checkpoint_io.hpp"
#include "ddss/config.hpp"
#include "ddss/csv.hpp"
#include "ddss/dataset.hpp"
#include "ddss/errors.hpp"
#include "ddss/features.hpp"
#include "ddss/ggdm.hpp"
#include "ddss/kid.hpp"
#include "ddss/metrics.hpp"
#include "ddss/report.hpp"
#include "ddss/samplers.hpp"
#include "ddss/schedule.hpp"
#include "ddss/search.hpp"
#include "ddss/svg.hpp"
#include "ddss/train.hpp"

namespace ddss {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config, out, family, kernel, features, stride, model, params;
  long long K = 0, steps = 0, seed = 0;
  double eta = 0.0;
  bool time = false;
};

struct FlagOpts {
  CLI::Option *config = nullptr, *out = nullptr, *family = nullptr, *kernel = nullptr,
              *features = nullptr, *stride = nullptr, *model = nullptr, *params = nullptr,
              *K = nullptr, *steps = nullptr, *seed = nullptr, *eta = nullptr, *time = nullptr;
};

FlagOpts add_flags(CLI::App* sub, Flags* f) {
  FlagOpts o;
  o.config = sub->add_option("--config", f->config, "TOML config file");
  o.out = sub->add_option("--out", f->out, "output directory");
  o.family = sub->add_option("--family", f->family, "sampler family to search");
  o.kernel = sub->add_option("--kernel", f->kernel, "kernel: linear|cubic");
  o.features = sub->add_option("--features", f->features, "features: identity|rff|file:PATH");
  o.stride = sub->add_option("--stride", f->stride, "stride: linear|quadratic|learned");
  o.model = sub->add_option("--model", f->model, "model checkpoint path");
  o.params = sub->add_option("--params", f->params, "sampler checkpoint path");
  o.K = sub->add_option("--K", f->K, "sampler step budget K");
  o.steps = sub->add_option("--steps", f->steps, "training/search steps");
  o.seed = sub->add_option("--seed", f->seed, "stream seed");
  o.eta = sub->add_option("--eta", f->eta, "ddim noise scale");
  o.time = sub->add_flag("--time", f->time, "also learn the query times");
  return o;
}

void apply_overrides(RunConfig* cfg, const Flags& f, const FlagOpts& o, const std::string& cmd) {
  if (o.out->count()) cfg->out.dir = f.out;
  if (o.family->count()) cfg->search.family = f.family;
  if (o.kernel->count()) {
    cfg->search.kernel = f.kernel;
    cfg->eval.kernel = f.kernel;
  }
  if (o.features->count()) {
    cfg->search.features = f.features;
    cfg->eval.features = f.features;
  }
  if (o.stride->count()) {
    if (f.stride == "learned") {
      // learned query times ride on the linear init grid
      cfg->search.time = true;
    } else {
      cfg->search.stride = f.stride;
      cfg->sample.stride = f.stride;
      cfg->eval.stride = f.stride;
    }
  }
  if (o.time->count()) cfg->search.time = true;
  if (o.K->count()) {
    if (f.K < 1) throw ConfigError("--K must be positive");
    cfg->search.K = std::size_t(f.K);
    cfg->sample.K = std::size_t(f.K);
    cfg->eval.Ks = {std::size_t(f.K)};
  }
  if (o.steps->count()) {
    if (f.steps < 0) throw ConfigError("--steps must be >= 0");
    if (cmd == "train") cfg->train.steps = std::size_t(f.steps);
    else cfg->search.steps = std::size_t(f.steps);
  }
  if (o.seed->count()) {
    if (f.seed < 0) throw ConfigError("--seed must be >= 0");
    cfg->train.seed = std::uint64_t(f.seed);
    cfg->search.seed = std::uint64_t(f.seed);
    cfg->sample.seed = std::uint64_t(f.seed);
    if (cmd == "eval" || cmd == "plot") cfg->eval.seeds = {std::uint64_t(f.seed)};
  }
  if (o.eta->count()) {
    cfg->sample.eta = f.eta;
    cfg->eval.eta = f.eta;
  }
  cfg->validate();
}

RunConfig resolve_config(const Flags& f, const FlagOpts& o, const std::string& cmd) {
  RunConfig cfg = o.config->count() ? RunConfig::load(f.config) : RunConfig();
  apply_overrides(&cfg, f, o, cmd);
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out.dir) / name).string();
}

void prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out.dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out.dir + "': " + ec.message());
  write_text_file(out_path(cfg, "resolved.toml"), cfg.resolved_toml());
}

struct DataBundle {
  tg::Tensor train, val;
  Mixture mix;
  bool has_mixture = false;
};

DataBundle make_data(const RunConfig& cfg) {
  DataBundle d;
  if (cfg.dataset.kind == "eight_gaussians") {
    d.mix = eight_gaussians(cfg.dataset.radius, cfg.dataset.sigma);
    d.has_mixture = true;
    NoiseStream rng(sub_seed(cfg.dataset.seed, domain_dataset));
    d.train = sample_mixture(d.mix, cfg.dataset.n, rng, 0);
    NoiseStream vrng(sub_seed(cfg.dataset.seed, domain_val_split));
    d.val = sample_mixture(d.mix, cfg.dataset.n_val, vrng, 0);
    return d;
  }
  const tg::Tensor all = load_points_csv(cfg.dataset.path);
  if (all.rows() < cfg.dataset.n_val + 2)
    throw ConfigError("[dataset] csv has too few rows for the requested validation split");
  const std::size_t n_train = all.rows() - cfg.dataset.n_val;
  d.train = tg::Tensor::zeros({n_train, all.cols()});
  d.val = tg::Tensor::zeros({cfg.dataset.n_val, all.cols()});
  std::copy(all.data(), all.data() + n_train * all.cols(), d.train.mut());
  std::copy(all.data() + n_train * all.cols(), all.data() + all.size(), d.val.mut());
  return d;
}

NoiseSchedule make_schedule(const RunConfig& cfg) {
  if (cfg.schedule.kind == "cosine_logsnr")
    return make_cosine_logsnr_schedule(cfg.schedule.T, cfg.schedule.logsnr_max,
                                       cfg.schedule.logsnr_min);
  return make_linear_beta_schedule(cfg.schedule.T, cfg.schedule.beta_min, cfg.schedule.beta_max);
}

FeatureMap make_features(const std::string& kind, std::size_t rff_dim, std::size_t d,
                         const tg::Tensor& train_data, std::uint64_t dataset_seed) {
  if (kind == "identity") return make_identity_features(d);
  if (kind == "rff") {
    const double ell = median_pairwise_distance(train_data);
    if (!(ell > 0.0)) throw DomainError("rff lengthscale degenerate: training points coincide");
    return make_rff_features(d, rff_dim, ell, sub_seed(dataset_seed, domain_features));
  }
  const std::string path = kind.substr(5);  // "file:PATH"
  Checkpoint c = load_checkpoint(path);
  auto it = c.arrays.find("features");
  if (it == c.arrays.end())
    throw IoError("feature file '" + path + "' has no 'features' array");
  return make_file_features(it->second);
}

ModelCheckpoint load_model(const RunConfig& cfg, const Flags& f, const FlagOpts& o) {
  const std::string path = o.model->count() ? f.model : out_path(cfg, "model.ckpt");
  return load_model_checkpoint(path);
}

void check_sampler_fingerprint(const SamplerParams& p, const NoiseSchedule& s,
                               const std::string& origin) {
  if (p.schedule_fingerprint == s.fingerprint()) return;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "sampler params were searched against schedule %016llx but the model carries "
                "%016llx",
                static_cast<unsigned long long>(p.schedule_fingerprint),
                static_cast<unsigned long long>(s.fingerprint()));
  throw FingerprintError(origin + ": " + buf);
}

std::vector<SamplerSpec> eval_specs(const RunConfig& cfg, const NoiseSchedule& s) {
  std::vector<SamplerSpec> specs;
  for (const auto& name : cfg.eval.samplers) {
    SamplerSpec spec;
    spec.name = name;
    spec.kind = name == "ddpm" ? SamplerSpec::ddpm : SamplerSpec::ddim;
    spec.eta = cfg.eval.eta;
    spec.stride = cfg.eval.stride;
    specs.push_back(std::move(spec));
  }
  for (const auto& path : cfg.eval.params) {
    SamplerSpec spec;
    spec.kind = SamplerSpec::ggdm;
    spec.params = load_sampler_checkpoint(path);
    check_sampler_fingerprint(spec.params, s, path);
    spec.name = fs::path(path).stem().string();
    specs.push_back(std::move(spec));
  }
  return specs;
}

int cmd_train(const RunConfig& cfg) {
  prepare_out_dir(cfg);
  DataBundle data = make_data(cfg);
  NoiseSchedule s = make_schedule(cfg);
  ScoreNetwork net =
      ScoreNetwork::init(data.train.cols(), cfg.model.width, cfg.model.emb_dim, cfg.model.blocks,
                         double(s.T), sub_seed(cfg.train.seed, domain_train));
  TrainConfig tc;
  tc.lr = cfg.train.lr;
  tc.batch = cfg.train.batch;
  tc.steps = cfg.train.steps;
  tc.weighting = cfg.train.weighting;
  tc.ema_decay = cfg.train.ema;
  tc.seed = sub_seed(cfg.train.seed, domain_train);
  TrainResult res = train_ddpm(net, s, data.train, tc);

  nlohmann::json extra;
  extra["train_seed"] = cfg.train.seed;
  extra["train_steps"] = cfg.train.steps;
  extra["initial_loss"] = res.initial_loss;
  extra["final_loss_ema"] = res.final_loss_ema;
  save_model_checkpoint(out_path(cfg, "model.ckpt"), res.net, res.ema, s, extra);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(res.loss_trace.size());
  for (std::size_t i = 0; i < res.loss_trace.size(); ++i)
    rows.push_back({std::to_string(i), fmt_g17(res.loss_trace[i])});
  write_csv(out_path(cfg, "train_loss.csv"), "step,loss", rows);

  std::printf("trained %zu steps: loss %.6g -> %.6g (ema)\n", cfg.train.steps, res.initial_loss,
              res.final_loss_ema);
  std::printf("wrote %s\n", out_path(cfg, "model.ckpt").c_str());
  return 0;
}

int cmd_search(const RunConfig& cfg, const Flags& f, const FlagOpts& o) {
  prepare_out_dir(cfg);
  ModelCheckpoint mc = load_model(cfg, f, o);
  DataBundle data = make_data(cfg);
  FeatureMap fmap = make_features(cfg.search.features, cfg.search.rff_dim, mc.ema.d, data.train,
                                  cfg.dataset.seed);

  SearchConfig sc;
  sc.family = family_from_string(cfg.search.family);
  sc.learn_time = cfg.search.time;
  sc.K = cfg.search.K;
  sc.stride = cfg.search.stride;
  sc.n = cfg.search.n;
  sc.steps = cfg.search.steps;
  sc.lr = cfg.search.lr;
  sc.kernel = kernel_from_string(cfg.search.kernel);
  sc.seed = sub_seed(cfg.search.seed, domain_search);
  sc.checkpoint_score = cfg.search.checkpoint;
  sc.init_off_diag = cfg.search.off_diag;

  SearchResult res = ddss_search(mc.ema, mc.schedule, data.train, data.val, fmap, sc);

  nlohmann::json extra;
  extra["search_seed"] = cfg.search.seed;
  extra["steps"] = cfg.search.steps;
  extra["kernel"] = cfg.search.kernel;
  extra["features"] = cfg.search.features;
  extra["init_val_kid"] = res.init_val_kid;
  extra["best_val_kid"] = res.best_val_kid;
  extra["final_val_kid"] = res.final_val_kid;
  extra["best_step"] = res.best_step;
  extra["aborted"] = res.aborted;
  save_sampler_checkpoint(out_path(cfg, "sampler_best.ckpt"), res.best_params, extra);
  save_sampler_checkpoint(out_path(cfg, "sampler_final.ckpt"), res.final_params, extra);
  write_trace_csv(out_path(cfg, "search_trace.csv"), res.trace);

  if (res.aborted) std::printf("search aborted on non-finite loss; kept last good state\n");
  std::printf("searched %s%s K=%zu for %zu steps\n", cfg.search.family.c_str(),
              cfg.search.time ? "+time" : "", cfg.search.K, res.trace.size() - 1);
  std::printf("val kid: init %.6g -> best %.6g (step %zu), final %.6g\n", res.init_val_kid,
              res.best_val_kid, res.best_step, res.final_val_kid);
  std::printf("wrote %s\n", out_path(cfg, "sampler_best.ckpt").c_str());
  return res.aborted ? 1 : 0;
}

int cmd_sample(const RunConfig& cfg, const Flags& f, const FlagOpts& o) {
  prepare_out_dir(cfg);
  ModelCheckpoint mc = load_model(cfg, f, o);
  const std::string params_path = o.params->count() ? f.params : cfg.sample.params;

  SampleBatch batch;
  if (!params_path.empty() || cfg.sample.sampler == "searched") {
    if (params_path.empty())
      throw ConfigError("sample: sampler \"searched\" needs --params or [sample] params");
    SamplerParams p = load_sampler_checkpoint(params_path);
    check_sampler_fingerprint(p, mc.schedule, params_path);
    batch = sample_ggdm(mc.ema, p, mc.schedule, cfg.sample.n, cfg.sample.seed,
                        cfg.sample.trajectories);
  } else {
    const auto stride = stride_timesteps(mc.schedule.T, cfg.sample.K, cfg.sample.stride);
    if (cfg.sample.sampler == "ddpm")
      batch = sample_ddpm_stride(mc.ema, mc.schedule, stride, cfg.sample.n, cfg.sample.seed,
                                 cfg.sample.trajectories);
    else
      batch = sample_ddim(mc.ema, mc.schedule, stride, cfg.sample.eta, cfg.sample.n,
                          cfg.sample.seed, cfg.sample.trajectories);
  }

  save_points_csv(out_path(cfg, "samples.csv"), batch.x0);
  std::printf("wrote %s (%zu points)\n", out_path(cfg, "samples.csv").c_str(), cfg.sample.n);

  if (cfg.sample.trajectories) {
    const std::size_t d = batch.x0.cols();
    std::string header = "t,i";
    for (std::size_t j = 0; j < d; ++j) header += ",x" + std::to_string(j);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t step = 0; step < batch.trajectory.size(); ++step) {
      const tg::Tensor& xt = batch.trajectory[step];
      const std::size_t t = batch.trajectory.size() - 1 - step;  // K, K-1, ..., 0
      for (std::size_t i = 0; i < xt.rows(); ++i) {
        std::vector<std::string> row{std::to_string(t), std::to_string(i)};
        for (std::size_t j = 0; j < d; ++j) row.push_back(fmt_g17(xt.data()[i * d + j]));
        rows.push_back(std::move(row));
      }
    }
    write_csv(out_path(cfg, "trajectories.csv"), header, rows);
    std::printf("wrote %s\n", out_path(cfg, "trajectories.csv").c_str());
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const Flags& f, const FlagOpts& o) {
  prepare_out_dir(cfg);
  ModelCheckpoint mc = load_model(cfg, f, o);
  DataBundle data = make_data(cfg);
  if (!data.has_mixture)
    throw ConfigError("eval: mode coverage needs mixture centers; csv datasets are not evaluable");
  FeatureMap fmap =
      make_features(cfg.eval.features, cfg.eval.rff_dim, mc.ema.d, data.train, cfg.dataset.seed);

  EvalConfig ec;
  ec.n_eval = cfg.eval.n_eval;
  ec.Ks = cfg.eval.Ks;
  ec.seeds = cfg.eval.seeds;
  ec.kernel = kernel_from_string(cfg.eval.kernel);
  ec.coverage_radius = cfg.eval.coverage_radius;

  MetricReport rep =
      build_report(mc.ema, mc.schedule, eval_specs(cfg, mc.schedule), ec, fmap, data.mix);
  write_report_csv(out_path(cfg, "report.csv"), rep);

  std::printf("sampler,K,seed,rbf_mmd,kid_val,wasserstein2,mode_coverage\n");
  for (const auto& r : rep.rows)
    std::printf("%s,%zu,%llu,%.6g,%.6g,%.6g,%.6g\n", r.sampler.c_str(), r.K,
                static_cast<unsigned long long>(r.seed), r.rbf_mmd, r.kid_val, r.wasserstein2,
                r.mode_coverage);
  std::printf("wrote %s\n", out_path(cfg, "report.csv").c_str());
  return 0;
}

int cmd_plot(const RunConfig& cfg, const Flags& f, const FlagOpts& o) {
  prepare_out_dir(cfg);
  ModelCheckpoint mc = load_model(cfg, f, o);
  DataBundle data = make_data(cfg);
  if (!data.has_mixture)
    throw ConfigError("plot: built-in panels need the mixture dataset");
  const std::size_t n = cfg.sample.n > 2048 ? 2048 : cfg.sample.n;
  const std::uint64_t seed = cfg.eval.seeds.empty() ? 1 : cfg.eval.seeds[0];

  std::vector<ScatterPanel> panels;
  NoiseStream real_rng(sub_seed(seed, domain_eval_real));
  panels.push_back({"data", sample_mixture(data.mix, n, real_rng, 0)});
  for (const auto& spec : eval_specs(cfg, mc.schedule)) {
    for (std::size_t K : cfg.eval.Ks) {
      if (spec.kind == SamplerSpec::ggdm && spec.params.K != K) continue;
      const std::uint64_t gseed = sub_seed(seed, domain_eval_gen);
      tg::Tensor pts;
      if (spec.kind == SamplerSpec::ddpm)
        pts = sample_ddpm_stride(mc.ema, mc.schedule, stride_timesteps(mc.schedule.T, K, spec.stride),
                                 n, gseed)
                  .x0;
      else if (spec.kind == SamplerSpec::ddim)
        pts = sample_ddim(mc.ema, mc.schedule, stride_timesteps(mc.schedule.T, K, spec.stride),
                          spec.eta, n, gseed)
                  .x0;
      else
        pts = sample_ggdm(mc.ema, spec.params, mc.schedule, n, gseed).x0;
      panels.push_back({spec.name + " K=" + std::to_string(K), std::move(pts)});
    }
  }
  write_scatter_svg(out_path(cfg, "plot.svg"), panels, cfg.config_hash(),
                    cfg.dataset.radius + 2.0);
  std::printf("wrote %s (%zu panels)\n", out_path(cfg, "plot.svg").c_str(), panels.size());
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"gradient search for few-step diffusion samplers"};
  app.require_subcommand(1);
  Flags f;
  CLI::App* strain = app.add_subcommand("train", "pre-train the noise predictor");
  CLI::App* ssearch = app.add_subcommand("search", "optimize sampler coefficients");
  CLI::App* ssample = app.add_subcommand("sample", "draw samples from a sampler");
  CLI::App* seval = app.add_subcommand("eval", "score samplers against held-out data");
  CLI::App* splot = app.add_subcommand("plot", "render scatter panels");
  const FlagOpts o_train = add_flags(strain, &f);
  const FlagOpts o_search = add_flags(ssearch, &f);
  const FlagOpts o_sample = add_flags(ssample, &f);
  const FlagOpts o_eval = add_flags(seval, &f);
  const FlagOpts o_plot = add_flags(splot, &f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(strain)) return cmd_train(resolve_config(f, o_train, "train"));
    if (app.got_subcommand(ssearch))
      return cmd_search(resolve_config(f, o_search, "search"), f, o_search);
    if (app.got_subcommand(ssample))
      return cmd_sample(resolve_config(f, o_sample, "sample"), f, o_sample);
    if (app.got_subcommand(seval)) return cmd_eval(resolve_config(f, o_eval, "eval"), f, o_eval);
    if (app.got_subcommand(splot)) return cmd_plot(resolve_config(f, o_plot, "plot"), f, o_plot);
    throw UsageError("no subcommand given");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const FingerprintError& e) {
    std::fprintf(stderr, "fingerprint mismatch: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace ddss
