#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/rng.hpp"
#include "ddss/tensor.hpp"

namespace ddss {

// Gaussian mixture with equal mode weights; centers stored [m x d] row-major.
struct Mixture {
  std::vector<double> centers;
  std::size_t dim = 2;
  double sigma = 0.3;
  std::size_t n_modes() const { return dim ? centers.size() / dim : 0; }
};

// benchmark density: 8 modes on a circle of radius 4, sigma 0.3
Mixture eight_gaussians(double radius = 4.0, double sigma = 0.3);

// n draws as [n x d]; element keys depend only on (seed, block, i, j) so any
// two consumers with the same seed/block see identical points.
tg::Tensor sample_mixture(const Mixture& mix, std::size_t n, const NoiseStream& rng,
                          std::uint64_t block);

tg::Tensor load_points_csv(const std::string& path);
void save_points_csv(const std::string& path, const tg::Tensor& pts);

}  // namespace ddss
