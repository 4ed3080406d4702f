#include "ddss/schedule.hpp"

#include <cmath>

#include "ddss/errors.hpp"
#include "ddss/kernels.hpp"
#include "ddss/tensor.hpp"

namespace ddss {

namespace {

double logsnr_of_abar(double abar) {
  // logit; schedules keep abar strictly inside (0,1)
  return std::log(abar) - std::log1p(-abar);
}

Pchip build_logsnr_interp(const std::vector<double>& alpha_bar) {
  const std::size_t T = alpha_bar.size();
  std::vector<double> x(T + 1), y(T + 1);
  for (std::size_t t = 1; t <= T; ++t) {
    x[t] = static_cast<double>(t);
    y[t] = logsnr_of_abar(alpha_bar[t - 1]);
  }
  x[0] = 0.0;
  // linear extension anchor: keeps the interpolant defined and monotone on
  // (0,1) where learned fractional timesteps may land
  y[0] = T >= 2 ? y[1] + (y[1] - y[2]) : y[1] + 1.0;
  return Pchip(std::move(x), std::move(y));
}

}  // namespace

double NoiseSchedule::alpha_bar_at(std::size_t t) const {
  if (t == 0) return 1.0;
  if (t > T) throw DomainError("alpha_bar_at: t=" + std::to_string(t) + " exceeds T=" + std::to_string(T));
  return alpha_bar[t - 1];
}

double NoiseSchedule::alpha_bar_cont(double t) const {
  return kernels::sigmoid(logsnr.eval(t));
}

double NoiseSchedule::snr_at(std::size_t t) const {
  const double ab = alpha_bar_at(t);
  return ab / (1.0 - ab);
}

std::uint64_t NoiseSchedule::fingerprint() const {
  std::uint64_t h = tg::fnv1a(kind.data(), kind.size());
  std::uint64_t tt = T;
  h = tg::fnv1a(&tt, sizeof(tt), h);
  h = tg::fnv1a(alpha_bar.data(), alpha_bar.size() * sizeof(double), h);
  return h;
}

void NoiseSchedule::validate() const {
  if (T == 0 || beta.size() != T || alpha_bar.size() != T)
    throw DomainError("schedule: T and array lengths disagree");
  double prod = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (!(beta[t] > 0.0 && beta[t] < 1.0))
      throw DomainError("schedule: beta[" + std::to_string(t + 1) + "] outside (0,1)");
    if (!(alpha_bar[t] > 0.0 && alpha_bar[t] < 1.0))
      throw DomainError("schedule: alpha_bar[" + std::to_string(t + 1) + "] outside (0,1)");
    if (t > 0 && !(alpha_bar[t] < alpha_bar[t - 1]))
      throw DomainError("schedule: alpha_bar must be strictly decreasing");
    prod *= 1.0 - beta[t];
    if (std::abs(prod - alpha_bar[t]) > 1e-12 * std::max(1.0, std::abs(prod)))
      throw DomainError("schedule: alpha_bar inconsistent with cumulative product of (1-beta)");
  }
}

NoiseSchedule make_linear_beta_schedule(std::size_t T, double beta_start, double beta_end) {
  if (T == 0) throw DomainError("schedule: T must be positive");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw DomainError("schedule: need 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.kind = "linear_beta";
  s.T = T;
  s.beta.resize(T);
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    s.beta[t] = T == 1 ? beta_start
                       : beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                             static_cast<double>(T - 1);
    prod *= 1.0 - s.beta[t];
    s.alpha_bar[t] = prod;
  }
  s.logsnr = build_logsnr_interp(s.alpha_bar);
  s.validate();
  return s;
}

NoiseSchedule make_cosine_logsnr_schedule(std::size_t T, double logsnr_max, double logsnr_min) {
  if (T < 2) throw DomainError("schedule: cosine log-SNR needs T >= 2");
  if (!(logsnr_max > logsnr_min)) throw DomainError("schedule: logsnr_max must exceed logsnr_min");
  NoiseSchedule s;
  s.kind = "cosine_logsnr";
  s.T = T;
  s.beta.resize(T);
  s.alpha_bar.resize(T);
  double prev = 1.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const double frac = static_cast<double>(t - 1) / static_cast<double>(T - 1);
    const double lam = logsnr_min + (logsnr_max - logsnr_min) * 0.5 * (1.0 + std::cos(M_PI * frac));
    s.alpha_bar[t - 1] = kernels::sigmoid(lam);
    s.beta[t - 1] = 1.0 - s.alpha_bar[t - 1] / prev;
    prev = s.alpha_bar[t - 1];
  }
  s.logsnr = build_logsnr_interp(s.alpha_bar);
  s.validate();
  return s;
}

NoiseSchedule schedule_from_alpha_bar(std::string kind, std::vector<double> alpha_bar) {
  NoiseSchedule s;
  s.kind = std::move(kind);
  s.T = alpha_bar.size();
  s.alpha_bar = std::move(alpha_bar);
  s.beta.resize(s.T);
  double prev = 1.0;
  for (std::size_t t = 0; t < s.T; ++t) {
    s.beta[t] = 1.0 - s.alpha_bar[t] / prev;
    prev = s.alpha_bar[t];
  }
  s.logsnr = build_logsnr_interp(s.alpha_bar);
  s.validate();
  return s;
}

std::vector<std::size_t> stride_timesteps(std::size_t T, std::size_t K, const std::string& kind) {
  if (K == 0 || K > T)
    throw DomainError("stride: K must be in 1.." + std::to_string(T) + ", got " + std::to_string(K));
  std::vector<std::size_t> out(K);
  for (std::size_t i = 1; i <= K; ++i) {
    double v;
    if (kind == "linear") {
      v = std::llround(static_cast<double>(i) * static_cast<double>(T) / static_cast<double>(K));
    } else if (kind == "quadratic") {
      const double f = static_cast<double>(i) / static_cast<double>(K);
      v = std::max<double>(1.0, std::llround(static_cast<double>(T) * f * f));
    } else {
      throw DomainError("stride: unknown kind '" + kind + "'");
    }
    out[i - 1] = static_cast<std::size_t>(v);
  }
  out[K - 1] = T;
  for (std::size_t i = 1; i < K; ++i)
    if (out[i] <= out[i - 1]) out[i] = out[i - 1] + 1;
  if (out[K - 1] > T) throw DomainError("stride: K too large to keep timesteps distinct up to T");
  return out;
}

}  // namespace ddss
