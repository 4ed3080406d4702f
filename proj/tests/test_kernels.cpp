#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"

#include "ddss/kernels.hpp"
#include "ddss/rng.hpp"

using namespace ddss;
namespace k = ddss::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, std::uint64_t salt, double lo = -2.0,
                             double hi = 2.0) {
  NoiseStream rng(901);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * rng.uniform(NoiseStream::data, salt, i);
  return v;
}

const std::vector<std::size_t> kSizes{1, 2, 3, 4, 5, 7, 8, 12, 16, 17, 31, 64, 100, 257};

// runs `body` under both backends and requires bitwise-equal outputs
template <typename Fn>
void backend_pair(Fn body) {
  k::force_backend(k::Backend::scalar);
  std::vector<double> ref = body();
  if (!k::cpu_has_avx2()) return;
  k::force_backend(k::Backend::avx2);
  std::vector<double> alt = body();
  REQUIRE(ref.size() == alt.size());
  CHECK(std::memcmp(ref.data(), alt.data(), ref.size() * sizeof(double)) == 0);
}

}  // namespace

TEST_CASE("elementwise ops match bitwise across backends") {
  for (std::size_t n : kSizes) {
    const auto a = rand_vec(n, 1), b = rand_vec(n, 2, 0.1, 2.0);
    backend_pair([&] {
      std::vector<double> out(6 * n);
      k::ops().add(out.data(), a.data(), b.data(), n);
      k::ops().sub(out.data() + n, a.data(), b.data(), n);
      k::ops().mul(out.data() + 2 * n, a.data(), b.data(), n);
      k::ops().div(out.data() + 3 * n, a.data(), b.data(), n);
      k::ops().scale(out.data() + 4 * n, a.data(), 1.7, n);
      k::ops().square(out.data() + 5 * n, a.data(), n);
      return out;
    });
    backend_pair([&] {
      std::vector<double> out(3 * n);
      k::ops().sqrt(out.data(), b.data(), n);
      k::ops().add_scaled(out.data() + n, a.data(), -0.3, b.data(), n);
      k::ops().add_scaled_ew(out.data() + 2 * n, a.data(), b.data(), a.data(), n);
      return out;
    });
  }
  k::force_backend(k::cpu_has_avx2() ? k::Backend::avx2 : k::Backend::scalar);
}

TEST_CASE("reductions: striped order is backend-invariant and near the naive sum") {
  for (std::size_t n : kSizes) {
    const auto a = rand_vec(n, 3), b = rand_vec(n, 4);
    backend_pair([&] { return std::vector<double>{k::ops().sum(a.data(), n)}; });
    backend_pair([&] { return std::vector<double>{k::ops().dot(a.data(), b.data(), n)}; });

    double naive_sum = 0.0, naive_dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      naive_sum += a[i];
      naive_dot += a[i] * b[i];
    }
    k::force_backend(k::Backend::scalar);
    CHECK(k::ops().sum(a.data(), n) == doctest::Approx(naive_sum).epsilon(1e-12));
    CHECK(k::ops().dot(a.data(), b.data(), n) == doctest::Approx(naive_dot).epsilon(1e-12));
  }
}

TEST_CASE("matmul variants agree bitwise across backends and with the naive triple loop") {
  struct Case {
    std::size_t m, kk, n;
  };
  for (const Case c : {Case{1, 1, 1}, Case{2, 3, 4}, Case{5, 8, 3}, Case{4, 4, 4},
                       Case{7, 13, 9}, Case{16, 16, 16}, Case{3, 66, 5}, Case{33, 17, 29}}) {
    const auto a = rand_vec(c.m * c.kk, 5);
    const auto b = rand_vec(c.kk * c.n, 6);
    const auto bt = rand_vec(c.n * c.kk, 7);   // B stored [n x k]
    const auto at = rand_vec(c.kk * c.m, 8);   // A stored [k x m]

    backend_pair([&] {
      std::vector<double> out(c.m * c.n, 0.0);
      k::ops().matmul_nn(out.data(), a.data(), b.data(), c.m, c.kk, c.n);
      return out;
    });
    backend_pair([&] {
      std::vector<double> out(c.m * c.n, 0.0);
      k::ops().matmul_nt(out.data(), a.data(), bt.data(), c.m, c.kk, c.n);
      return out;
    });
    backend_pair([&] {
      std::vector<double> out(c.m * c.n, 0.0);
      k::ops().matmul_tn(out.data(), at.data(), b.data(), c.m, c.kk, c.n);
      return out;
    });

    k::force_backend(k::Backend::scalar);
    std::vector<double> got(c.m * c.n, 0.0), want(c.m * c.n, 0.0);
    k::ops().matmul_nn(got.data(), a.data(), b.data(), c.m, c.kk, c.n);
    for (std::size_t i = 0; i < c.m; ++i)
      for (std::size_t p = 0; p < c.kk; ++p)
        for (std::size_t j = 0; j < c.n; ++j) want[i * c.n + j] += a[i * c.kk + p] * b[p * c.n + j];
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));

    std::fill(got.begin(), got.end(), 0.0);
    k::ops().matmul_nt(got.data(), a.data(), bt.data(), c.m, c.kk, c.n);
    for (std::size_t i = 0; i < c.m; ++i)
      for (std::size_t j = 0; j < c.n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < c.kk; ++p) acc += a[i * c.kk + p] * bt[j * c.kk + p];
        CHECK(got[i * c.n + j] == doctest::Approx(acc).epsilon(1e-12));
      }

    std::fill(got.begin(), got.end(), 0.0);
    k::ops().matmul_tn(got.data(), at.data(), b.data(), c.m, c.kk, c.n);
    for (std::size_t i = 0; i < c.m; ++i)
      for (std::size_t j = 0; j < c.n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < c.kk; ++p) acc += at[p * c.m + i] * b[p * c.n + j];
        CHECK(got[i * c.n + j] == doctest::Approx(acc).epsilon(1e-12));
      }
  }
}

TEST_CASE("row/column broadcast kernels match across backends") {
  for (std::size_t rows : {1u, 3u, 8u, 17u}) {
    for (std::size_t cols : {1u, 2u, 5u, 16u, 33u}) {
      const auto a = rand_vec(rows * cols, 9);
      const auto r = rand_vec(cols, 10);
      const auto c = rand_vec(rows, 11);
      backend_pair([&] {
        std::vector<double> out(2 * rows * cols);
        k::ops().add_row(out.data(), a.data(), r.data(), rows, cols);
        k::ops().scale_rows(out.data() + rows * cols, a.data(), c.data(), rows, cols);
        return out;
      });
    }
  }
  k::force_backend(k::cpu_has_avx2() ? k::Backend::avx2 : k::Backend::scalar);
}

TEST_CASE("transcendental maps share one scalar path") {
  const auto a = rand_vec(101, 12, -30.0, 30.0);
  std::vector<double> out(101);
  k::sigmoid_map(out.data(), a.data(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(out[i] == k::sigmoid(a[i]));
  k::softplus_map(out.data(), a.data(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(out[i] == k::softplus(a[i]));
  k::silu_map(out.data(), a.data(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(out[i] == a[i] * k::sigmoid(a[i]));
  k::sin_map(out.data(), a.data(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(out[i] == std::sin(a[i]));
  k::cos_map(out.data(), a.data(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(out[i] == std::cos(a[i]));

  CHECK(k::sigmoid(0.0) == 0.5);
  CHECK(k::sigmoid(-750.0) == 0.0);        // saturates to an exact zero (past subnormals)
  CHECK(k::sigmoid(710.0) == 1.0);
  CHECK(k::softplus(800.0) == 800.0);      // overflow-safe linear regime
  CHECK(k::softplus(-800.0) == 0.0);
  CHECK(k::softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("backend selection reports a valid active backend") {
  const k::Backend b = k::active_backend();
  CHECK((b == k::Backend::scalar || b == k::Backend::avx2));
  if (b == k::Backend::avx2) CHECK(k::cpu_has_avx2());
  CHECK(k::backend_name() != nullptr);
}
