#include "ddss/samplers.hpp"

#include <cmath>

#include "ddss/errors.hpp"
#include "ddss/kernels.hpp"

namespace ddss {

namespace {

void check_stride(const NoiseSchedule& s, const std::vector<std::size_t>& stride) {
  if (stride.empty()) throw DomainError("sampler: empty stride");
  for (std::size_t i = 0; i < stride.size(); ++i) {
    if (stride[i] < 1 || stride[i] > s.T) throw DomainError("sampler: stride time outside 1..T");
    if (i && stride[i] <= stride[i - 1])
      throw DomainError("sampler: stride must be strictly increasing");
  }
}

tg::Tensor lincomb3(double ca, const tg::Tensor& a, double cb, const tg::Tensor& b, double cz,
                    const tg::Tensor& z) {
  const auto& o = kernels::ops();
  tg::Tensor out = tg::Tensor::zeros(a.shape());
  o.scale(out.mut(), a.data(), ca, a.size());
  o.add_scaled(out.mut(), out.data(), cb, b.data(), a.size());
  o.add_scaled(out.mut(), out.data(), cz, z.data(), a.size());
  return out;
}

tg::Tensor invert_to_x0(const tg::Tensor& x, const tg::Tensor& eps, double abar) {
  // (x - sqrt(1-abar) eps) / sqrt(abar)
  const auto& o = kernels::ops();
  tg::Tensor out = tg::Tensor::zeros(x.shape());
  o.add_scaled(out.mut(), x.data(), -std::sqrt(1.0 - abar), eps.data(), x.size());
  o.scale(out.mut(), out.data(), 1.0 / std::sqrt(abar), x.size());
  return out;
}

}  // namespace

tg::Value sample_ggdm_on_tape(tg::Tape& tp, const SamplerTable& tbl, const ScoreNetwork& net,
                              std::size_t n, const NoiseStream& rng, std::uint64_t noise_block,
                              bool checkpoint_score, std::vector<tg::Value>* trajectory) {
  const std::size_t K = tbl.K, d = net.d;
  std::vector<tg::Value> w;
  w.reserve(net.params.size());
  for (const auto& pm : net.params) w.push_back(tp.constant(pm));

  auto embed = [&](std::size_t q) -> tg::Value {
    if (tbl.learn_time && tbl.tau_v[q].defined())
      return time_embedding_value(tp, net, tbl.tau_v[q], n);
    return tp.constant(
        time_embedding_batch(std::vector<double>(n, tbl.tau[q]), net.emb_dim, net.T));
  };
  const ScoreNetwork* net_p = &net;
  tg::Recipe recipe = [net_p](tg::Tape& t, const std::vector<tg::Value>& in) {
    std::vector<tg::Value> ws(in.begin() + 2, in.end());
    return score_forward(t, *net_p, ws, in[0], in[1]);
  };
  auto score_at = [&](tg::Value x, std::size_t q) -> tg::Value {
    tg::Value emb = embed(q);
    if (checkpoint_score) {
      std::vector<tg::Value> ins = {x, emb};
      ins.insert(ins.end(), w.begin(), w.end());
      return tp.checkpoint(recipe, ins);
    }
    return score_forward(tp, net, w, x, emb);
  };

  std::vector<tg::Value> hist(K + 1);
  hist[K] = tp.constant(rng.gaussian_block(NoiseStream::step, noise_block + K, n, d));
  if (trajectory) trajectory->push_back(hist[K]);
  for (std::size_t t = K - 1; t >= 1; --t) {
    tg::Value eps = score_at(hist[t + 1], t + 1);
    tg::Value x0 = predict_x0(tp, hist[t + 1], eps, tbl, t + 1);
    tg::Value mean = tp.scale(x0, tbl.mu0[t]);
    for (std::size_t j = 0; j < K - t; ++j)
      mean = tp.add(mean, tp.scale(hist[t + 1 + j], tbl.mu[t][j]));
    tg::Value z = tp.constant(rng.gaussian_block(NoiseStream::step, noise_block + t, n, d));
    hist[t] = tp.reparam(mean, tbl.sigma[t], z);
    if (trajectory) trajectory->push_back(hist[t]);
  }
  tg::Value out = predict_x0(tp, hist[1], score_at(hist[1], 1), tbl, 1);
  if (trajectory) trajectory->push_back(out);
  return out;
}

SampleBatch sample_ggdm(const ScoreNetwork& net, const SamplerParams& params,
                        const NoiseSchedule& s, std::size_t n, std::uint64_t seed,
                        bool keep_trajectory, std::uint64_t noise_block) {
  if (params.schedule_fingerprint != 0 && params.schedule_fingerprint != s.fingerprint())
    throw FingerprintError("sampler params were trained against a different schedule");
  tg::Tape tp;
  auto leaves = register_params(tp, params);
  SamplerTable tbl = build_sampler_table(tp, params, leaves, s);
  NoiseStream rng(seed);
  std::vector<tg::Value> traj;
  tg::Value out = sample_ggdm_on_tape(tp, tbl, net, n, rng, noise_block, false,
                                      keep_trajectory ? &traj : nullptr);
  SampleBatch b;
  b.seed = seed;
  b.x0 = tp.val(out);
  for (tg::Value v : traj) b.trajectory.push_back(tp.val(v));
  return b;
}

SampleBatch sample_ddpm_stride(const ScoreNetwork& net, const NoiseSchedule& s,
                               const std::vector<std::size_t>& stride, std::size_t n,
                               std::uint64_t seed, bool keep_trajectory,
                               std::uint64_t noise_block) {
  check_stride(s, stride);
  const std::size_t K = stride.size(), d = net.d;
  NoiseStream rng(seed);
  SampleBatch b;
  b.seed = seed;
  tg::Tensor x = rng.gaussian_block(NoiseStream::step, noise_block + K, n, d);
  if (keep_trajectory) b.trajectory.push_back(x);
  for (std::size_t t = K - 1; t >= 1; --t) {
    const double au = s.alpha_bar_at(stride[t]);      // noisier kept time tau_{t+1}
    const double as = s.alpha_bar_at(stride[t - 1]);  // tau_t
    tg::Tensor eps = predict_eps(net, x, static_cast<double>(stride[t]));
    tg::Tensor x0 = invert_to_x0(x, eps, au);
    const double step_a = au / as;
    const double c_next = std::sqrt(step_a) * (1.0 - as) / (1.0 - au);
    const double c_zero = std::sqrt(as) * (1.0 - step_a) / (1.0 - au);
    const double sig = std::sqrt((1.0 - as) / (1.0 - au) * (1.0 - step_a));
    tg::Tensor z = rng.gaussian_block(NoiseStream::step, noise_block + t, n, d);
    x = lincomb3(c_next, x, c_zero, x0, sig, z);
    if (keep_trajectory) b.trajectory.push_back(x);
  }
  tg::Tensor eps = predict_eps(net, x, static_cast<double>(stride[0]));
  b.x0 = invert_to_x0(x, eps, s.alpha_bar_at(stride[0]));
  if (keep_trajectory) b.trajectory.push_back(b.x0);
  return b;
}

SampleBatch sample_ddim_sigma(const ScoreNetwork& net, const NoiseSchedule& s,
                              const std::vector<std::size_t>& stride,
                              const std::vector<double>& sigma, std::size_t n, std::uint64_t seed,
                              bool keep_trajectory, std::uint64_t noise_block) {
  check_stride(s, stride);
  const std::size_t K = stride.size(), d = net.d;
  if (sigma.size() + 1 != K && !(K == 1 && sigma.empty()))
    throw ShapeError("sample_ddim: need K-1 sigmas");
  for (std::size_t t = 1; t < K; ++t) {
    const double bound2 = 1.0 - s.alpha_bar_at(stride[t - 1]);
    if (sigma[t - 1] < 0.0 || sigma[t - 1] * sigma[t - 1] > bound2)
      throw DomainError("sample_ddim: sigma at transition " + std::to_string(t) +
                        " outside [0, sqrt(1-alpha_bar))");
  }
  NoiseStream rng(seed);
  SampleBatch b;
  b.seed = seed;
  tg::Tensor x = rng.gaussian_block(NoiseStream::step, noise_block + K, n, d);
  if (keep_trajectory) b.trajectory.push_back(x);
  for (std::size_t t = K - 1; t >= 1; --t) {
    const double au = s.alpha_bar_at(stride[t]);
    const double as = s.alpha_bar_at(stride[t - 1]);
    const double sg = sigma[t - 1];
    tg::Tensor eps = predict_eps(net, x, static_cast<double>(stride[t]));
    tg::Tensor x0 = invert_to_x0(x, eps, au);
    // x_t = sqrt(as) x0 + sqrt(1-as-sg^2) eps + sg z
    tg::Tensor z = rng.gaussian_block(NoiseStream::step, noise_block + t, n, d);
    tg::Tensor nx = lincomb3(std::sqrt(as), x0, std::sqrt(1.0 - as - sg * sg), eps, sg, z);
    x = nx;
    if (keep_trajectory) b.trajectory.push_back(x);
  }
  tg::Tensor eps = predict_eps(net, x, static_cast<double>(stride[0]));
  b.x0 = invert_to_x0(x, eps, s.alpha_bar_at(stride[0]));
  if (keep_trajectory) b.trajectory.push_back(b.x0);
  return b;
}

SampleBatch sample_ddim(const ScoreNetwork& net, const NoiseSchedule& s,
                        const std::vector<std::size_t>& stride, double eta, std::size_t n,
                        std::uint64_t seed, bool keep_trajectory, std::uint64_t noise_block) {
  check_stride(s, stride);
  if (eta < 0.0) throw DomainError("sample_ddim: eta must be non-negative");
  const std::size_t K = stride.size();
  std::vector<double> sigma;
  for (std::size_t t = 1; t < K; ++t) {
    const double au = s.alpha_bar_at(stride[t]);
    const double as = s.alpha_bar_at(stride[t - 1]);
    sigma.push_back(eta * std::sqrt((1.0 - as) / (1.0 - au) * (1.0 - au / as)));
  }
  return sample_ddim_sigma(net, s, stride, sigma, n, seed, keep_trajectory, noise_block);
}

}  // namespace ddss
