#include "ddss/score_network.hpp"

#include <cmath>

#include "ddss/errors.hpp"
#include "ddss/rng.hpp"

namespace ddss {

namespace {

tg::Tensor gaussian_matrix(const NoiseStream& rng, std::uint64_t layer, std::size_t r,
                           std::size_t c, double stddev) {
  tg::Tensor w = tg::Tensor::zeros({r, c});
  double* p = w.mut();
  for (std::size_t i = 0; i < r * c; ++i)
    p[i] = stddev * rng.gaussian(NoiseStream::param, layer, i);
  return w;
}

}  // namespace

ScoreNetwork ScoreNetwork::init(std::size_t d, std::size_t width, std::size_t emb_dim,
                                std::size_t n_blocks, double T, std::uint64_t seed) {
  if (d == 0 || width == 0 || emb_dim == 0 || emb_dim % 2 != 0)
    throw DomainError("score network: need d,width > 0 and even emb_dim");
  ScoreNetwork net;
  net.d = d;
  net.width = width;
  net.emb_dim = emb_dim;
  net.n_blocks = n_blocks;
  net.T = T;
  NoiseStream rng(seed);
  std::uint64_t layer = 0;
  auto push = [&](const std::string& name, tg::Tensor t) {
    net.names.push_back(name);
    net.params.push_back(std::move(t));
  };
  const std::size_t in_dim = d + emb_dim;
  push("in.w", gaussian_matrix(rng, layer++, in_dim, width, 1.0 / std::sqrt((double)in_dim)));
  push("in.b", tg::Tensor::zeros({1, width}));
  for (std::size_t k = 0; k < n_blocks; ++k) {
    push("block" + std::to_string(k) + ".w",
         gaussian_matrix(rng, layer++, width, width, 1.0 / std::sqrt((double)width)));
    push("block" + std::to_string(k) + ".b", tg::Tensor::zeros({1, width}));
  }
  // zero-initialized head: the fresh network predicts zero noise everywhere
  push("out.w", tg::Tensor::zeros({width, d}));
  push("out.b", tg::Tensor::zeros({1, d}));
  return net;
}

ScoreNetwork ScoreNetwork::clone() const {
  ScoreNetwork c = *this;
  c.params.clear();
  for (const auto& p : params) {
    tg::Tensor q = tg::Tensor::zeros(p.shape());
    std::copy(p.data(), p.data() + p.size(), q.mut());
    c.params.push_back(std::move(q));
  }
  return c;
}

std::uint64_t ScoreNetwork::weights_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : params) h = tg::fnv1a(p.data(), p.size() * sizeof(double), h);
  return h;
}

tg::Tensor embedding_freqs(std::size_t dim, double T) {
  if (dim == 0 || dim % 2 != 0) throw DomainError("time embedding: dim must be positive even");
  const std::size_t h = dim / 2;
  tg::Tensor f = tg::Tensor::zeros({1, h});
  for (std::size_t k = 0; k < h; ++k) {
    const double e = h > 1 ? static_cast<double>(k) / static_cast<double>(h - 1) : 0.0;
    f.mut()[k] = std::pow(10000.0, e) / T;
  }
  return f;
}

tg::Tensor time_embedding(double t, std::size_t dim, double T) {
  tg::Tensor f = embedding_freqs(dim, T);
  const std::size_t h = dim / 2;
  tg::Tensor e = tg::Tensor::zeros({1, dim});
  for (std::size_t k = 0; k < h; ++k) {
    e.mut()[k] = std::sin(f.data()[k] * t);
    e.mut()[h + k] = std::cos(f.data()[k] * t);
  }
  return e;
}

tg::Tensor time_embedding_batch(const std::vector<double>& ts, std::size_t dim, double T) {
  tg::Tensor f = embedding_freqs(dim, T);
  const std::size_t h = dim / 2, n = ts.size();
  tg::Tensor e = tg::Tensor::zeros({n, dim});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < h; ++k) {
      e.mut()[i * dim + k] = std::sin(f.data()[k] * ts[i]);
      e.mut()[i * dim + h + k] = std::cos(f.data()[k] * ts[i]);
    }
  return e;
}

tg::Value score_forward(tg::Tape& tp, const ScoreNetwork& net, const std::vector<tg::Value>& w,
                        tg::Value x, tg::Value emb) {
  if (w.size() != net.params.size())
    throw DomainError("score_forward: weight count mismatch");
  tg::Accountant::Scope scope("score_interior");
  tg::Value h = tp.concat({x, emb}, 1);
  h = tp.silu(tp.add(tp.matmul(h, w[0]), w[1]));
  for (std::size_t k = 0; k < net.n_blocks; ++k)
    h = tp.add(h, tp.silu(tp.add(tp.matmul(h, w[2 + 2 * k]), w[3 + 2 * k])));
  const std::size_t f = 2 + 2 * net.n_blocks;
  return tp.add(tp.matmul(h, w[f]), w[f + 1]);
}

tg::Value time_embedding_value(tg::Tape& tp, const ScoreNetwork& net, tg::Value tau,
                               std::size_t n) {
  tg::Value f = tp.constant(embedding_freqs(net.emb_dim, net.T));
  tg::Value arg = tp.mul(tau, f);  // scalar x row -> [1, emb/2]
  tg::Value row = tp.concat({tp.sin(arg), tp.cos(arg)}, 1);
  if (n == 1) return row;
  return tp.matmul(tp.constant(tg::Tensor::full({n, 1}, 1.0)), row);
}

tg::Tensor predict_eps(const ScoreNetwork& net, const tg::Tensor& x, double t) {
  tg::Tape tp;
  tg::Value vx = tp.constant(x);
  tg::Value emb =
      tp.constant(time_embedding_batch(std::vector<double>(x.rows(), t), net.emb_dim, net.T));
  std::vector<tg::Value> w;
  w.reserve(net.params.size());
  for (const auto& p : net.params) w.push_back(tp.constant(p));
  return tp.val(score_forward(tp, net, w, vx, emb));
}

}  // namespace ddss
