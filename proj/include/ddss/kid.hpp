#pragma once
#include <cstddef>
#include <string>

#include "ddss/tape.hpp"
#include "ddss/tensor.hpp"

namespace ddss {

enum class KernelKind { linear, cubic };
KernelKind kernel_from_string(const std::string& s);

// kernel over feature vectors of dimension d:
//   linear: f^T g          cubic: ((1/d) f^T g + 1)^3
struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  std::size_t d = 0;
};

double kernel_eval(const KernelSpec& k, const tg::Tensor& fx, const tg::Tensor& fy);

// unbiased two-sample estimate between feature batches fp [n x d], fq [m x d];
// needs n, m >= 2
double kid_unbiased(const KernelSpec& k, const tg::Tensor& fp, const tg::Tensor& fq);
// differentiable in fp; fq enters as fixed reference data
tg::Value kid_unbiased_on_tape(tg::Tape& tp, const KernelSpec& k, tg::Value fp,
                               const tg::Tensor& fq);

}  // namespace ddss
