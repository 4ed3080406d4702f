#pragma once
#include <cstddef>
#include <vector>

#include "ddss/tensor.hpp"

namespace ddss {

// Bias-corrected Adam over a fixed list of variables. Moments are owned here;
// update() returns fresh tensors, never writing through published storage.
struct AdamState {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<tg::Tensor> m, v;

  void init(const std::vector<tg::Tensor>& vars);
  // grads[i] may be undefined (treated as zero: variable unchanged)
  void update(std::vector<tg::Tensor>& vars, const std::vector<tg::Tensor>& grads);
};

}  // namespace ddss
