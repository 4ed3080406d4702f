#include <cmath>
#include <cstring>

#include "ddss/kernels.hpp"

// Reference backend. The loops below define the numeric contract; the AVX2
// backend reproduces the exact same operation order.

namespace ddss::kernels {

namespace scalar {

void add(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void div(double* out, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}

void scale(double* out, const double* a, double c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * c;
}

void add_scaled(double* out, const double* a, double c, const double* b,
                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + c * b[i];
}

void add_scaled_ew(double* out, const double* a, const double* s,
                   const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s[i] * b[i];
}

void square(double* out, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * a[i];
}

void sqrt_(double* out, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(a[i]);
}

double sum(const double* a, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i];
    s1 += a[i + 1];
    s2 += a[i + 2];
    s3 += a[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matmul_nn(double* c, const double* a, const double* b, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

void matmul_nt(double* c, const double* a, const double* b, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot(a + i * k, b + j * k, k);
}

void matmul_tn(double* c, const double* a, const double* b, std::size_t m,
               std::size_t k, std::size_t n) {
  // A is [k x m]: C_ij = sum_p A[p,i] * B[p,j]
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

void add_row(double* out, const double* a, const double* row, std::size_t rows,
             std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = a[i * cols + j] + row[j];
}

void scale_rows(double* out, const double* a, const double* col,
                std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double cv = col[i];
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = a[i * cols + j] * cv;
  }
}

}  // namespace scalar

const Ops& scalar_ops() {
  static const Ops k = {
      scalar::add,       scalar::sub,       scalar::mul,
      scalar::div,       scalar::scale,     scalar::add_scaled,
      scalar::add_scaled_ew, scalar::square, scalar::sqrt_,
      scalar::sum,       scalar::dot,       scalar::matmul_nn,
      scalar::matmul_nt, scalar::matmul_tn, scalar::add_row,
      scalar::scale_rows,
  };
  return k;
}

// Transcendentals: one scalar path shared by all backends so backend choice
// never changes results.

void exp_map(double* out, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a[i]);
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double softplus(double x) {
  // log(1+e^x) without overflow for large |x|
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void sigmoid_map(double* out, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid(a[i]);
}

void softplus_map(double* out, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = softplus(a[i]);
}

void silu_map(double* out, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * sigmoid(a[i]);
}

void sin_map(double* out, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(a[i]);
}

void cos_map(double* out, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::cos(a[i]);
}

}  // namespace ddss::kernels
