#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/pchip.hpp"

namespace ddss {

// Discrete forward-process schedule on t = 1..T with continuous extension.
// alpha_bar[t-1] is the squared signal coefficient of q(x_t | x_0); the
// continuous lookup interpolates log-SNR monotonically so fractional
// timesteps stay well ordered.
struct NoiseSchedule {
  std::string kind;
  std::size_t T = 0;
  std::vector<double> beta;       // index t-1
  std::vector<double> alpha_bar;  // index t-1, strictly decreasing
  Pchip logsnr;                   // knots at t = 0..T

  double alpha_bar_at(std::size_t t) const;  // t in 0..T, alpha_bar_at(0) = 1
  double logsnr_at(double t) const { return logsnr.eval(t); }
  double alpha_bar_cont(double t) const;     // sigmoid(logsnr(t))
  double snr_at(std::size_t t) const;

  std::uint64_t fingerprint() const;
  void validate() const;  // throws DomainError on inconsistency
};

NoiseSchedule make_linear_beta_schedule(std::size_t T, double beta_start, double beta_end);
// log-SNR follows the half-cosine from logsnr_max at t=1 down to logsnr_min
// at t=T; alpha_bar = sigmoid(logsnr).
NoiseSchedule make_cosine_logsnr_schedule(std::size_t T, double logsnr_max = 20.0,
                                          double logsnr_min = -20.0);
NoiseSchedule schedule_from_alpha_bar(std::string kind, std::vector<double> alpha_bar);

// Kept-time subsequences tau_1 < ... < tau_K = T for K-step sampling.
// kind: "linear" tau_i = round(i*T/K); "quadratic" tau_i = max(1, round(T*(i/K)^2));
// duplicates are resolved by bumping forward.
std::vector<std::size_t> stride_timesteps(std::size_t T, std::size_t K, const std::string& kind);

}  // namespace ddss
