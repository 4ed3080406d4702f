#include "ddss/kid.hpp"

#include <cmath>
#include <vector>

#include "ddss/errors.hpp"
#include "ddss/kernels.hpp"

namespace ddss {

namespace {

using tg::Tensor;
using tg::Value;

double cube(double x) { return x * x * x; }

void check_batch(const KernelSpec& k, const Tensor& f, const char* side) {
  if (!f.defined() || f.rank() != 2)
    throw ShapeError(std::string("kid: ") + side + " features must be [n x d]");
  if (f.cols() != k.d)
    throw ShapeError(std::string("kid: ") + side + " feature dim does not match kernel");
  if (f.rows() < 2)
    throw DomainError(std::string("kid: unbiased estimate needs >= 2 ") + side + " samples");
}

Tensor colsum(const Tensor& f) {
  Tensor out = Tensor::zeros({1, f.cols()});
  double* o = out.mut();
  const double* p = f.data();
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = 0; j < f.cols(); ++j) o[j] += p[i * f.cols() + j];
  return out;
}

// sum_{i != j} f_i . f_j  ==  ||sum_i f_i||^2 - sum_i ||f_i||^2
double linear_offdiag_sum(const Tensor& f) {
  Tensor s = colsum(f);
  const auto& ops = kernels::ops();
  return ops.dot(s.data(), s.data(), s.size()) - ops.dot(f.data(), f.data(), f.size());
}

// sums of the cubic kernel over a Gram block, with and without the diagonal
struct CubicSums {
  double all = 0.0;
  double diag = 0.0;
};

CubicSums cubic_sums(const Tensor& a, const Tensor& b, double inv_d, bool diagonal) {
  Tensor g = Tensor::zeros({a.rows(), b.rows()});
  kernels::ops().matmul_nt(g.mut(), a.data(), b.data(), a.rows(), a.cols(), b.rows());
  CubicSums s;
  const double* p = g.data();
  const std::size_t rows = a.rows(), cols = b.rows();
  for (std::size_t i = 0; i < rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < cols; ++j) row += cube(p[i * cols + j] * inv_d + 1.0);
    s.all += row;
    if (diagonal) s.diag += cube(p[i * cols + i] * inv_d + 1.0);
  }
  return s;
}

Value cube_on_tape(tg::Tape& tp, Value x) { return tp.mul(tp.square(x), x); }

}  // namespace

KernelKind kernel_from_string(const std::string& s) {
  if (s == "linear") return KernelKind::linear;
  if (s == "cubic") return KernelKind::cubic;
  throw ConfigError("unknown kernel '" + s + "' (expect linear or cubic)");
}

double kernel_eval(const KernelSpec& k, const Tensor& fx, const Tensor& fy) {
  if (!fx.defined() || !fy.defined() || fx.size() != k.d || fy.size() != k.d)
    throw ShapeError("kernel eval: feature vectors must have the kernel dimension");
  const double ip = kernels::ops().dot(fx.data(), fy.data(), k.d);
  switch (k.kind) {
    case KernelKind::linear: return ip;
    case KernelKind::cubic: return cube(ip / double(k.d) + 1.0);
  }
  throw Error("kernel eval: unreachable");
}

double kid_unbiased(const KernelSpec& k, const Tensor& fp, const Tensor& fq) {
  check_batch(k, fp, "generated");
  check_batch(k, fq, "reference");
  const double n = double(fp.rows()), m = double(fq.rows());
  if (k.kind == KernelKind::linear) {
    Tensor sp = colsum(fp), sq = colsum(fq);
    const double cross = kernels::ops().dot(sp.data(), sq.data(), k.d);
    return linear_offdiag_sum(fp) / (n * (n - 1.0)) - 2.0 * cross / (n * m) +
           linear_offdiag_sum(fq) / (m * (m - 1.0));
  }
  const double inv_d = 1.0 / double(k.d);
  CubicSums pp = cubic_sums(fp, fp, inv_d, true);
  CubicSums pq = cubic_sums(fp, fq, inv_d, false);
  CubicSums qq = cubic_sums(fq, fq, inv_d, true);
  return (pp.all - pp.diag) / (n * (n - 1.0)) - 2.0 * pq.all / (n * m) +
         (qq.all - qq.diag) / (m * (m - 1.0));
}

Value kid_unbiased_on_tape(tg::Tape& tp, const KernelSpec& k, Value fp,
                           const Tensor& fq) {
  // val() returns a reference into tape storage, which later node insertions
  // may reallocate — capture the dimensions up front instead of keeping it
  const std::size_t fp_rows = tp.val(fp).rows(), fp_cols = tp.val(fp).cols();
  check_batch(k, tp.val(fp), "generated");
  check_batch(k, fq, "reference");
  const double n = double(fp_rows), m = double(fq.rows());
  const double inv_pp = 1.0 / (n * (n - 1.0));
  const double inv_pq = -2.0 / (n * m);

  if (k.kind == KernelKind::linear) {
    Tensor ones = Tensor::full({1, fp_rows}, 1.0);
    Value sp = tp.matmul(tp.constant(ones), fp);  // [1 x d] column sums
    Value pp = tp.scale(tp.sub(tp.sum(tp.square(sp)), tp.sum(tp.square(fp))), inv_pp);
    Value pq = tp.scale(tp.sum(tp.mul(sp, tp.constant(colsum(fq)))), inv_pq);
    const double qq = linear_offdiag_sum(fq) / (m * (m - 1.0));
    return tp.add(tp.add(pp, pq), tp.constant(qq));
  }

  const double inv_d = 1.0 / double(k.d);
  Value one = tp.constant(1.0);
  // within-batch block: off-diagonal sum = full sum - diagonal, where the
  // diagonal only needs row norms
  Value gram = tp.matmul(fp, fp, /*trans_b=*/true);
  Value kmat = cube_on_tape(tp, tp.add(tp.scale(gram, inv_d), one));
  Value rown = tp.matmul(tp.square(fp), tp.constant(Tensor::full({fp_cols, 1}, 1.0)));
  Value diag = cube_on_tape(tp, tp.add(tp.scale(rown, inv_d), one));
  Value pp = tp.scale(tp.sub(tp.sum(kmat), tp.sum(diag)), inv_pp);
  Value cross = tp.matmul(fp, tp.constant(fq), /*trans_b=*/true);
  Value pq = tp.scale(tp.sum(cube_on_tape(tp, tp.add(tp.scale(cross, inv_d), one))), inv_pq);
  CubicSums qq = cubic_sums(fq, fq, inv_d, true);
  return tp.add(tp.add(pp, pq), tp.constant((qq.all - qq.diag) / (m * (m - 1.0))));
}

}  // namespace ddss
