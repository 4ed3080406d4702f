#include "ddss/train.hpp"

#include <cmath>

#include "ddss/adam.hpp"
#include "ddss/errors.hpp"
#include "ddss/rng.hpp"

namespace ddss {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (batch < 1) throw ConfigError("train: batch must be positive");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("train: ema_decay outside [0,1)");
  if (weighting != "simple" && weighting != "max1snr")
    throw ConfigError("train: weighting must be simple or max1snr");
}

tg::Value forward_marginal_sample(tg::Tape& tp, const NoiseSchedule& s, tg::Value x0,
                                  std::size_t t, tg::Value noise) {
  if (t < 1 || t > s.T) throw DomainError("forward_marginal_sample: t outside 1..T");
  const double ab = s.alpha_bar_at(t);
  return tp.reparam(tp.scale(x0, std::sqrt(ab)), tp.constant(std::sqrt(1.0 - ab)), noise);
}

namespace {

// without-replacement batch cursor; reshuffles per epoch with counter draws
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

}  // namespace

TrainResult train_ddpm(const ScoreNetwork& init, const NoiseSchedule& s, const tg::Tensor& data,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (data.rank() != 2 || data.cols() != init.d)
    throw ShapeError("train: dataset must be [n x d] matching the network");
  const std::size_t nd = data.rows(), d = init.d, nb = cfg.batch;

  TrainResult res;
  res.net = init.clone();
  res.ema = init.clone();

  AdamState opt;
  opt.lr = cfg.lr;
  opt.init(res.net.params);

  NoiseStream rng(cfg.seed);
  BatchCursor cursor(rng, nd);
  double loss_ema = 0.0;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    // assemble the batch: x0 rows, per-example t, target noise
    tg::Tensor x0 = tg::Tensor::zeros({nb, d});
    std::vector<double> ts(nb);
    tg::Tensor wts = tg::Tensor::zeros({nb, 1});
    bool weighted = false;
    for (std::size_t i = 0; i < nb; ++i) {
      const std::size_t row = cursor.next();
      for (std::size_t j = 0; j < d; ++j) x0.mut()[i * d + j] = data.at(row * d + j);
      const std::size_t t = 1 + rng.bits(NoiseStream::step, step, i) % s.T;
      ts[i] = static_cast<double>(t);
      double w = 1.0;
      if (cfg.weighting == "max1snr") w = std::max(1.0, s.snr_at(t));
      wts.mut()[i] = w;
      if (w != 1.0) weighted = true;
    }
    tg::Tensor eps = rng.gaussian_block(NoiseStream::data, step, nb, d);
    tg::Tensor xt = tg::Tensor::zeros({nb, d});
    for (std::size_t i = 0; i < nb; ++i) {
      const double ab = s.alpha_bar_at(static_cast<std::size_t>(ts[i]));
      const double ca = std::sqrt(ab), cb = std::sqrt(1.0 - ab);
      for (std::size_t j = 0; j < d; ++j)
        xt.mut()[i * d + j] = ca * x0.at(i * d + j) + cb * eps.at(i * d + j);
    }

    tg::Tape tp;
    std::vector<tg::Value> w;
    w.reserve(res.net.params.size());
    for (const auto& pm : res.net.params) w.push_back(tp.leaf(pm, true));
    tg::Value emb = tp.constant(time_embedding_batch(ts, init.emb_dim, init.T));
    tg::Value pred = score_forward(tp, res.net, w, tp.constant(xt), emb);
    tg::Value sq = tp.square(tp.sub(tp.constant(eps), pred));
    if (weighted) sq = tp.mul(sq, tp.constant(wts));
    tg::Value loss = tp.scale(tp.sum(sq), 1.0 / static_cast<double>(nb));

    const double lv = tp.val(loss).item();
    if (!std::isfinite(lv))
      throw Error("training diverged: loss is not finite at step " + std::to_string(step));
    if (step == 0) {
      res.initial_loss = lv;
      loss_ema = lv;
    } else {
      loss_ema = 0.99 * loss_ema + 0.01 * lv;
    }
    res.loss_trace.push_back(lv);

    auto grads = tp.backward(loss);
    std::vector<tg::Tensor> g;
    g.reserve(w.size());
    for (tg::Value v : w) g.push_back(grads.at(v.id));
    opt.update(res.net.params, g);

    const double dk = cfg.ema_decay;
    for (std::size_t i = 0; i < res.net.params.size(); ++i) {
      double* e = res.ema.params[i].mut();
      const double* p = res.net.params[i].data();
      for (std::size_t j = 0; j < res.ema.params[i].size(); ++j)
        e[j] = dk * e[j] + (1.0 - dk) * p[j];
    }
  }
  res.final_loss_ema = loss_ema;
  return res;
}

}  // namespace ddss
