#pragma once
#include <cstdint>
#include <map>
#include <string>

#include "ddss/ggdm.hpp"
#include "ddss/schedule.hpp"
#include "ddss/score_network.hpp"
#include "ddss/tensor.hpp"

#include "json.hpp"

namespace ddss {

// Single-file container: 8-byte magic, little-endian u64 header length, JSON
// header (sorted keys, no whitespace), then raw little-endian f64 payload.
// Saving the result of a load reproduces the file byte for byte.
inline constexpr char kCheckpointMagic[9] = "DDSSCKP1";
inline constexpr std::uint64_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, tg::Tensor> arrays;
  nlohmann::json metadata = nlohmann::json::object();
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// trained model: raw + EMA weights + the exact forward schedule
void save_model_checkpoint(const std::string& path, const ScoreNetwork& net,
                           const ScoreNetwork& ema, const NoiseSchedule& s,
                           nlohmann::json extra = nlohmann::json::object());
struct ModelCheckpoint {
  ScoreNetwork net, ema;
  NoiseSchedule schedule;
  nlohmann::json metadata;
};
ModelCheckpoint load_model_checkpoint(const std::string& path);

// searched sampler params, stamped with the schedule fingerprint
void save_sampler_checkpoint(const std::string& path, const SamplerParams& p,
                             nlohmann::json extra = nlohmann::json::object());
SamplerParams load_sampler_checkpoint(const std::string& path);

}  // namespace ddss
