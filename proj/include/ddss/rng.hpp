#pragma once
#include <cstdint>

#include "ddss/tensor.hpp"

namespace ddss {

// Counter-based random streams: every draw is a pure function of
// (seed, purpose, step, index), so independently generated consumers agree
// bit-for-bit regardless of draw order. That is what makes paired-noise
// comparisons across samplers exact.

std::uint64_t splitmix64(std::uint64_t x);

// stable sub-stream seed for independent consumers (dataset, train, eval, ...)
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t domain);

// fixed domain tags so separate tools derive non-overlapping streams
enum StreamDomain : std::uint64_t {
  domain_dataset = 1,
  domain_train = 2,
  domain_search = 3,
  domain_eval_gen = 4,
  domain_eval_real = 5,
  domain_features = 6,
  domain_val_split = 7,
};

class NoiseStream {
 public:
  enum Purpose : std::uint64_t { init = 0, step = 1, data = 2, param = 3, pick = 4 };

  explicit NoiseStream(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t seed() const { return seed_; }

  // uniform in [0,1)
  double uniform(Purpose p, std::uint64_t a, std::uint64_t b) const;
  double gaussian(Purpose p, std::uint64_t a, std::uint64_t b) const;
  std::uint64_t bits(Purpose p, std::uint64_t a, std::uint64_t b) const;

  // [n x d] standard normal block, element (i,j) keyed by (purpose, step, i*d+j)
  tg::Tensor gaussian_block(Purpose p, std::uint64_t step, std::size_t n, std::size_t d) const;

 private:
  std::uint64_t seed_;
};

}  // namespace ddss
