#pragma once
#include <cstddef>

// Low-level numeric kernels with two interchangeable backends: a scalar
// reference implementation and an AVX2 one. Both follow the same fixed
// evaluation order so results are bitwise identical:
//
//  * reductions (sum, dot, and the dot-per-element matmul_nt) accumulate into
//    four striped partial sums (lane l sees elements l, l+4, l+8, ...),
//    combine them as (s0+s1)+(s2+s3), then fold the tail sequentially;
//  * matmul_nn / matmul_tn accumulate with the contraction index outermost
//    and the output column innermost, one mul followed by one add (no FMA);
//  * transcendental maps (exp/sigmoid/softplus/silu/sin/cos) have a single
//    shared scalar implementation used by every backend.
//
// The active backend is chosen once at startup: DDSS_KERNELS=scalar|avx2|auto
// overrides CPU detection.

namespace ddss::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name();
bool cpu_has_avx2();
// Test hook; throws std::runtime_error if the CPU lacks the requested ISA.
void force_backend(Backend b);

struct Ops {
  void (*add)(double* out, const double* a, const double* b, std::size_t n);
  void (*sub)(double* out, const double* a, const double* b, std::size_t n);
  void (*mul)(double* out, const double* a, const double* b, std::size_t n);
  void (*div)(double* out, const double* a, const double* b, std::size_t n);
  void (*scale)(double* out, const double* a, double c, std::size_t n);
  // out = a + c*b (elementwise, scalar c)
  void (*add_scaled)(double* out, const double* a, double c, const double* b,
                     std::size_t n);
  // out = a + s.*b (elementwise s)
  void (*add_scaled_ew)(double* out, const double* a, const double* s,
                        const double* b, std::size_t n);
  void (*square)(double* out, const double* a, std::size_t n);
  void (*sqrt)(double* out, const double* a, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // C[m x n] = A[m x k] * B[k x n]; C must be zero-initialized by the caller.
  void (*matmul_nn)(double* c, const double* a, const double* b, std::size_t m,
                    std::size_t k, std::size_t n);
  // C[m x n] = A[m x k] * B^T with B stored [n x k]; C_ij = dot(A_i, B_j).
  void (*matmul_nt)(double* c, const double* a, const double* b, std::size_t m,
                    std::size_t k, std::size_t n);
  // C[m x n] = A^T * B with A stored [k x m], B stored [k x n]; caller zeroes C.
  void (*matmul_tn)(double* c, const double* a, const double* b, std::size_t m,
                    std::size_t k, std::size_t n);
  // out[r x cols] = a[r x cols] + row[cols] broadcast over rows
  void (*add_row)(double* out, const double* a, const double* row,
                  std::size_t rows, std::size_t cols);
  // out[r x cols] = a[r x cols] scaled per-row by col[r]
  void (*scale_rows)(double* out, const double* a, const double* col,
                     std::size_t rows, std::size_t cols);
};

const Ops& ops();

// Shared scalar transcendental maps (same path for every backend).
void exp_map(double* out, const double* a, std::size_t n);
void sigmoid_map(double* out, const double* a, std::size_t n);
void softplus_map(double* out, const double* a, std::size_t n);
void silu_map(double* out, const double* a, std::size_t n);
void sin_map(double* out, const double* a, std::size_t n);
void cos_map(double* out, const double* a, std::size_t n);

double sigmoid(double x);
double softplus(double x);

}  // namespace ddss::kernels
