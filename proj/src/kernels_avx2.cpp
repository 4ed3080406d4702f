#include <cmath>

#if defined(__AVX2__)
#include <immintrin.h>
#endif

#include "ddss/kernels.hpp"

// AVX2 backend. Mirrors the scalar reference order exactly: striped 4-lane
// accumulators map onto one ymm register, mul and add stay separate
// instructions (no FMA), tails run the scalar loop.

namespace ddss::kernels {

const Ops& scalar_ops();

#if defined(__AVX2__)

namespace avx2 {

inline double combine_lanes(__m256d v) {
  alignas(32) double s[4];
  _mm256_store_pd(s, v);
  return (s[0] + s[1]) + (s[2] + s[3]);
}

void add(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void div(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] / b[i];
}

void scale(double* out, const double* a, double c, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vc));
  for (; i < n; ++i) out[i] = a[i] * c;
}

void add_scaled(double* out, const double* a, double c, const double* b,
                std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(vc, _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), t));
  }
  for (; i < n; ++i) out[i] = a[i] + c * b[i];
}

void add_scaled_ew(double* out, const double* a, const double* s,
                   const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(_mm256_loadu_pd(s + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), t));
  }
  for (; i < n; ++i) out[i] = a[i] + s[i] * b[i];
}

void square(double* out, const double* a, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(a + i);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(v, v));
  }
  for (; i < n; ++i) out[i] = a[i] * a[i];
}

void sqrt_(double* out, const double* a, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sqrt_pd(_mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = std::sqrt(a[i]);
}

double sum(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = combine_lanes(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double s = combine_lanes(acc);
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
      const __m256d vav = _mm256_set1_pd(av);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d t = _mm256_mul_pd(vav, _mm256_loadu_pd(brow + j));
        _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), t));
      }
      for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
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
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      const __m256d vav = _mm256_set1_pd(av);
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d t = _mm256_mul_pd(vav, _mm256_loadu_pd(brow + j));
        _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), t));
      }
      for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

void add_row(double* out, const double* a, const double* row, std::size_t rows,
             std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * cols;
    double* orow = out + i * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(orow + j, _mm256_add_pd(_mm256_loadu_pd(arow + j), _mm256_loadu_pd(row + j)));
    for (; j < cols; ++j) orow[j] = arow[j] + row[j];
  }
}

void scale_rows(double* out, const double* a, const double* col,
                std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * cols;
    double* orow = out + i * cols;
    const __m256d vc = _mm256_set1_pd(col[i]);
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(orow + j, _mm256_mul_pd(_mm256_loadu_pd(arow + j), vc));
    for (; j < cols; ++j) orow[j] = arow[j] * col[i];
  }
}

}  // namespace avx2

const Ops& avx2_ops() {
  static const Ops k = {
      avx2::add,       avx2::sub,       avx2::mul,
      avx2::div,       avx2::scale,     avx2::add_scaled,
      avx2::add_scaled_ew, avx2::square, avx2::sqrt_,
      avx2::sum,       avx2::dot,       avx2::matmul_nn,
      avx2::matmul_nt, avx2::matmul_tn, avx2::add_row,
      avx2::scale_rows,
  };
  return k;
}

#else  // !__AVX2__ (non-x86 build): never selected, fall back to scalar.

const Ops& avx2_ops() { return scalar_ops(); }

#endif

}  // namespace ddss::kernels
