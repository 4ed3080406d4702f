#include "ddss/adam.hpp"

#include <cmath>

#include "ddss/errors.hpp"

namespace ddss {

void AdamState::init(const std::vector<tg::Tensor>& vars) {
  step = 0;
  m.clear();
  v.clear();
  for (const auto& t : vars) {
    m.push_back(tg::Tensor::zeros(t.shape()));
    v.push_back(tg::Tensor::zeros(t.shape()));
  }
}

void AdamState::update(std::vector<tg::Tensor>& vars, const std::vector<tg::Tensor>& grads) {
  if (vars.size() != m.size() || grads.size() != vars.size())
    throw ShapeError("adam: variable/gradient/moment counts disagree");
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (!grads[i].defined()) continue;  // zero gradient: moments decay to zero anyway
    if (!grads[i].same_shape(vars[i]))
      throw ShapeError("adam: gradient shape mismatch at variable " + std::to_string(i));
    const double* g = grads[i].data();
    double* mi = m[i].mut();
    double* vi = v[i].mut();
    tg::Tensor next = tg::Tensor::zeros(vars[i].shape());
    double* x = next.mut();
    const double* x0 = vars[i].data();
    for (std::size_t j = 0; j < next.size(); ++j) {
      mi[j] = beta1 * mi[j] + (1.0 - beta1) * g[j];
      vi[j] = beta2 * vi[j] + (1.0 - beta2) * g[j] * g[j];
      const double mhat = mi[j] / c1;
      const double vhat = vi[j] / c2;
      x[j] = x0[j] - lr * mhat / (std::sqrt(vhat) + eps);
    }
    vars[i] = next;
  }
}

}  // namespace ddss
