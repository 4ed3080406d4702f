#include "ddss/rng.hpp"

#include <cmath>

namespace ddss {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t domain) {
  return splitmix64(splitmix64(seed) ^ domain * 0x9e3779b97f4a7c15ull);
}

namespace {
std::uint64_t key(std::uint64_t seed, std::uint64_t p, std::uint64_t a,
                  std::uint64_t b, std::uint64_t lane) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc908ull);
  h = splitmix64(h ^ p);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ lane);
}

double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}
}  // namespace

std::uint64_t NoiseStream::bits(Purpose p, std::uint64_t a, std::uint64_t b) const {
  return key(seed_, p, a, b, 0);
}

double NoiseStream::uniform(Purpose p, std::uint64_t a, std::uint64_t b) const {
  return to_unit(key(seed_, p, a, b, 0));
}

double NoiseStream::gaussian(Purpose p, std::uint64_t a, std::uint64_t b) const {
  // Box-Muller, one draw per counter. u1 in (0,1] keeps the log finite.
  const double u1 = 1.0 - to_unit(key(seed_, p, a, b, 1));
  const double u2 = to_unit(key(seed_, p, a, b, 2));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

tg::Tensor NoiseStream::gaussian_block(Purpose p, std::uint64_t step,
                                       std::size_t n, std::size_t d) const {
  tg::Tensor t = tg::Tensor::zeros({n, d});
  double* out = t.mut();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out[i * d + j] = gaussian(p, step, i * d + j);
  return t;
}

}  // namespace ddss
