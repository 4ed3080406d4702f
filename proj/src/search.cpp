#include "ddss/search.hpp"

#include <cmath>
#include <cstring>

#include "ddss/adam.hpp"
#include "ddss/csv.hpp"
#include "ddss/errors.hpp"

namespace ddss {

namespace {

using tg::Tensor;
using tg::Value;

struct BatchCursor {
  const NoiseStream& rng;
  std::vector<std::size_t> perm;
  std::size_t pos = 0;
  std::uint64_t epoch = 0;

  BatchCursor(const NoiseStream& r, std::size_t n) : rng(r), perm(n) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    shuffle();
  }
  void shuffle() {
    for (std::size_t i = perm.size(); i > 1; --i) {
      const std::size_t j = rng.bits(NoiseStream::pick, epoch, i) % i;
      std::swap(perm[i - 1], perm[j]);
    }
    ++epoch;
    pos = 0;
  }
  std::size_t next() {
    if (pos == perm.size()) shuffle();
    return perm[pos++];
  }
};

Tensor gather_rows(const Tensor& data, BatchCursor& cur, std::size_t n) {
  const std::size_t d = data.cols();
  Tensor out = Tensor::zeros({n, d});
  double* o = out.mut();
  const double* p = data.data();
  for (std::size_t i = 0; i < n; ++i)
    std::memcpy(o + i * d, p + cur.next() * d, d * sizeof(double));
  return out;
}

}  // namespace

void SearchConfig::validate() const {
  if (K == 0) throw ConfigError("search: K must be positive");
  if (n < 2) throw ConfigError("search: batch size must be >= 2");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("search: lr must be positive");
  if (stride != "linear" && stride != "quadratic")
    throw ConfigError("search: stride must be linear or quadratic (got '" + stride + "')");
}

SearchResult ddss_search(const ScoreNetwork& net, const NoiseSchedule& s,
                         const tg::Tensor& train_data, const tg::Tensor& val_data,
                         const FeatureMap& fmap, const SearchConfig& cfg) {
  cfg.validate();
  if (fmap.kind == FeatureMap::file_backed)
    throw UsageError(
        "search generates fresh samples every step; file-backed features "
        "cannot embed them — use identity or rff");
  if (!train_data.defined() || train_data.rank() != 2 || train_data.cols() != net.d)
    throw ShapeError("search: training data must be [n x d] matching the network");
  if (!val_data.defined() || val_data.rank() != 2 || val_data.cols() != net.d)
    throw ShapeError("search: validation data must be [n x d] matching the network");
  if (train_data.rows() < cfg.n)
    throw ConfigError("search: training set smaller than the per-step batch");
  if (val_data.rows() < 2) throw ConfigError("search: validation set needs >= 2 rows");

  const std::uint64_t weights_before = net.weights_hash();
  const KernelSpec spec{cfg.kernel, fmap.out_dim};
  const Tensor fval = apply_features(fmap, val_data);

  SearchResult res;
  res.init_params =
      init_from_ddpm(s, cfg.K, cfg.stride, cfg.family, cfg.learn_time, cfg.init_off_diag);
  res.best_params = res.init_params;
  SamplerParams cur = res.init_params;
  const std::vector<std::string> keys = cur.keys();

  NoiseStream rng(cfg.seed);
  BatchCursor cursor(rng, train_data.rows());
  AdamState opt;
  opt.lr = cfg.lr;
  bool opt_ready = false;

  res.trace.reserve(cfg.steps + 1);
  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    tg::Tape tp;
    std::vector<Value> leaves = register_params(tp, cur);
    SamplerTable tbl = build_sampler_table(tp, cur, leaves, s);
    Value gen = sample_ggdm_on_tape(tp, tbl, net, cfg.n, rng,
                                    /*noise_block=*/step * (cfg.K + 1), cfg.checkpoint_score);
    Value fgen = apply_features(tp, fmap, gen);
    Tensor freal = apply_features(fmap, gather_rows(train_data, cursor, cfg.n));
    Value loss = kid_unbiased_on_tape(tp, spec, fgen, freal);

    const double train_kid = tp.val(loss).item();
    const double val_kid = kid_unbiased(spec, tp.val(fgen), fval);
    res.trace.push_back({step, train_kid, val_kid});
    if (!std::isfinite(train_kid) || !std::isfinite(val_kid)) {
      // leave cur at the last finite state and stop
      res.aborted = true;
      break;
    }
    if (step == 0) res.init_val_kid = val_kid;
    if (step == 0 || val_kid < res.best_val_kid) {
      res.best_val_kid = val_kid;
      res.best_params = cur;
      res.best_step = step;
    }
    if (step == cfg.steps) break;

    tg::GradientMap grads = tp.backward(loss);
    std::vector<Tensor> vars, gvec;
    vars.reserve(keys.size());
    gvec.reserve(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      vars.push_back(Tensor::from({cur.raw.at(keys[i]).size()}, cur.raw.at(keys[i])));
      auto it = grads.find(leaves[i].id);
      gvec.push_back(it == grads.end() ? Tensor() : it->second);
    }
    if (!opt_ready) {
      opt.init(vars);
      opt_ready = true;
    }
    opt.update(vars, gvec);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      std::vector<double>& raw = cur.raw.at(keys[i]);
      std::memcpy(raw.data(), vars[i].data(), raw.size() * sizeof(double));
    }
  }

  res.final_params = cur;
  res.final_val_kid = res.trace.back().val_kid;
  if (net.weights_hash() != weights_before)
    throw Error("internal invariant violated: score weights changed during sampler search");
  return res;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const auto& r : rows)
    cells.push_back({std::to_string(r.step), fmt_g17(r.train_kid), fmt_g17(r.val_kid)});
  write_csv(path, "step,train_kid,val_kid", cells);
}

}  // namespace ddss
