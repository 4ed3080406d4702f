#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/toml.hpp"

namespace ddss {

// Full run configuration. Every field has a default; a config file only
// overrides what it names. Unknown sections or keys are rejected outright,
// and the resolved (fully expanded) form can be re-emitted byte-identically.
struct RunConfig {
  struct Dataset {
    std::string kind = "eight_gaussians";  // or "csv"
    std::string path;
    std::size_t n = 4096;
    std::size_t n_val = 1024;
    double radius = 4.0;
    double sigma = 0.3;
    std::uint64_t seed = 7;
  } dataset;

  struct Schedule {
    std::string kind = "cosine_logsnr";  // or "linear_beta"
    std::size_t T = 128;
    double logsnr_min = -20.0;
    double logsnr_max = 20.0;
    double beta_min = 1e-4;
    double beta_max = 0.02;
  } schedule;

  struct Model {
    std::size_t width = 128;
    std::size_t emb_dim = 64;
    std::size_t blocks = 3;
  } model;

  struct Train {
    double lr = 1e-3;
    std::size_t batch = 256;
    std::size_t steps = 4000;
    std::string weighting = "simple";  // or "max1snr"
    double ema = 0.9999;
    std::uint64_t seed = 17;
  } train;

  struct Search {
    std::string family = "ggdm";
    bool time = false;
    std::size_t K = 5;
    std::size_t n = 512;
    std::size_t steps = 2000;
    double lr = 5e-4;
    std::string kernel = "linear";
    std::string features = "rff";  // identity | rff | file:PATH
    std::size_t rff_dim = 512;
    std::string stride = "linear";
    std::uint64_t seed = 33;
    bool checkpoint = true;
    double off_diag = 1e-4;
  } search;

  struct Sample {
    std::string sampler = "ddpm";  // ddpm | ddim | searched
    std::string params;            // sampler checkpoint when "searched"
    std::size_t n = 2048;
    std::size_t K = 5;
    double eta = 0.0;
    std::string stride = "linear";
    std::uint64_t seed = 101;
    bool trajectories = false;
  } sample;

  struct Eval {
    std::size_t n_eval = 2048;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<std::size_t> Ks{5};
    std::string kernel = "linear";
    std::string features = "rff";
    std::size_t rff_dim = 512;
    double coverage_radius = 0.9;
    std::vector<std::string> samplers{"ddpm", "ddim"};
    double eta = 0.0;
    std::vector<std::string> params;  // searched-sampler checkpoints
    std::string stride = "linear";
  } eval;

  struct Out {
    std::string dir = "out";
  } out;

  static RunConfig load(const std::string& path);
  static RunConfig from_toml(const TomlTable& table);
  std::string resolved_toml() const;
  std::uint64_t config_hash() const;
  void validate() const;
};

}  // namespace ddss
