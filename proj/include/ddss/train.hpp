#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/schedule.hpp"
#include "ddss/score_network.hpp"
#include "ddss/tape.hpp"

namespace ddss {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 256;
  std::size_t steps = 4000;
  std::string weighting = "simple";  // simple | max1snr
  double ema_decay = 0.9999;
  std::uint64_t seed = 0;
  void validate() const;
};

struct TrainResult {
  ScoreNetwork net;
  ScoreNetwork ema;  // EMA shadow of the weights
  std::vector<double> loss_trace;
  double initial_loss = 0.0;
  double final_loss_ema = 0.0;  // smoothed training loss, for the decrease check
};

// x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) noise, on the tape
tg::Value forward_marginal_sample(tg::Tape& tp, const NoiseSchedule& s, tg::Value x0,
                                  std::size_t t, tg::Value noise);

// eps-prediction MSE training with uniform timesteps; batches sweep the
// dataset without replacement, reshuffling each epoch.
TrainResult train_ddpm(const ScoreNetwork& init, const NoiseSchedule& s, const tg::Tensor& data,
                       const TrainConfig& cfg);

}  // namespace ddss
