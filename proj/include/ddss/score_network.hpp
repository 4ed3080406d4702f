#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/tape.hpp"
#include "ddss/tensor.hpp"

namespace ddss {

// Residual MLP noise predictor eps(x, t). Time enters through a sinusoidal
// embedding of t/T, so fractional (learned) timesteps are first-class.
struct ScoreNetwork {
  std::size_t d = 2;
  std::size_t width = 128;
  std::size_t emb_dim = 64;
  std::size_t n_blocks = 3;
  double T = 128.0;  // embedding time scale

  std::vector<std::string> names;   // parallel to params
  std::vector<tg::Tensor> params;   // in.w, in.b, {blockK.w, blockK.b}, out.w, out.b

  static ScoreNetwork init(std::size_t d, std::size_t width, std::size_t emb_dim,
                           std::size_t n_blocks, double T, std::uint64_t seed);
  ScoreNetwork clone() const;       // deep copy (EMA shadow)
  std::uint64_t weights_hash() const;
};

// [1 x dim]: first half sin(f_k t/T), second half cos; f_k spans 1..1e4
// geometrically. dim must be even.
tg::Tensor time_embedding(double t, std::size_t dim, double T);
// [n x dim], row i embeds ts[i]
tg::Tensor time_embedding_batch(const std::vector<double>& ts, std::size_t dim, double T);
// [1 x dim/2] of f_k / T, the multipliers the on-tape embedding needs
tg::Tensor embedding_freqs(std::size_t dim, double T);

// Forward pass. Weights enter as tape values so one graph serves both
// pre-training (trainable leaves) and search (constants). Interior
// activations carry the "score_interior" accountant tag.
tg::Value score_forward(tg::Tape& tp, const ScoreNetwork& net, const std::vector<tg::Value>& w,
                        tg::Value x, tg::Value emb);

// on-tape embedding of a scalar time value, broadcast to n rows
tg::Value time_embedding_value(tg::Tape& tp, const ScoreNetwork& net, tg::Value tau,
                               std::size_t n);

// eps prediction for a plain batch at a fixed time; no gradients retained
tg::Tensor predict_eps(const ScoreNetwork& net, const tg::Tensor& x, double t);

}  // namespace ddss
