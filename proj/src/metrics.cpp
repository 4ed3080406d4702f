#include "ddss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ddss/errors.hpp"
#include "ddss/features.hpp"

namespace ddss {

namespace {

using tg::Tensor;

void check_points(const Tensor& t, const char* who) {
  if (!t.defined() || t.rank() != 2 || t.rows() == 0 || t.cols() == 0)
    throw ShapeError(std::string(who) + ": expected non-empty [n x d] matrix");
}

double sqdist(const double* x, const double* y, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = x[k] - y[k];
    s += diff * diff;
  }
  return s;
}

Tensor vstack(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros({a.rows() + b.rows(), a.cols()});
  double* o = out.mut();
  std::copy(a.data(), a.data() + a.size(), o);
  std::copy(b.data(), b.data() + b.size(), o + a.size());
  return out;
}

// sum of k(x_i, y_j) over the whole block and over its diagonal
void rbf_block(const Tensor& x, const Tensor& y, double gamma, double* all, double* diag) {
  const std::size_t n = x.rows(), m = y.rows(), d = x.cols();
  double sa = 0.0, sd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      row += std::exp(-gamma * sqdist(x.data() + i * d, y.data() + j * d, d));
    sa += row;
    if (diag && i < m) sd += std::exp(-gamma * sqdist(x.data() + i * d, y.data() + i * d, d));
  }
  *all = sa;
  if (diag) *diag = sd;
}

// Assignment by shortest augmenting paths with dual potentials (the
// Jonker-Volgenant refinement of the Hungarian method). cost is row-major
// n x n; returns the optimal total cost.
double solve_assignment(const std::vector<double>& cost, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* crow = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = crow[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) total += cost[(p[j] - 1) * n + (j - 1)];
  return total;
}

}  // namespace

double median_heuristic_bandwidth(const tg::Tensor& a, const tg::Tensor& b) {
  check_points(a, "bandwidth");
  check_points(b, "bandwidth");
  if (a.cols() != b.cols()) throw ShapeError("bandwidth: dimension mismatch");
  const double h = median_pairwise_distance(vstack(a, b));
  if (!(h > 0.0))
    throw DomainError("median-heuristic bandwidth is zero (all pooled points coincide)");
  return h;
}

double rbf_mmd(const tg::Tensor& a, const tg::Tensor& b, double bandwidth) {
  check_points(a, "rbf mmd");
  check_points(b, "rbf mmd");
  if (a.cols() != b.cols()) throw ShapeError("rbf mmd: dimension mismatch");
  if (a.rows() < 2 || b.rows() < 2)
    throw DomainError("rbf mmd: unbiased estimate needs >= 2 samples per side");
  const double h = bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(a, b);
  if (!std::isfinite(h) || h <= 0.0) throw DomainError("rbf mmd: bandwidth must be positive");
  const double gamma = 1.0 / (2.0 * h * h);
  const double n = double(a.rows()), m = double(b.rows());
  double aa, ad, bb, bd, ab;
  rbf_block(a, a, gamma, &aa, &ad);
  rbf_block(b, b, gamma, &bb, &bd);
  rbf_block(a, b, gamma, &ab, nullptr);
  return (aa - ad) / (n * (n - 1.0)) - 2.0 * ab / (n * m) + (bb - bd) / (m * (m - 1.0));
}

double wasserstein2(const tg::Tensor& a, const tg::Tensor& b) {
  check_points(a, "wasserstein2");
  check_points(b, "wasserstein2");
  if (a.cols() != b.cols()) throw ShapeError("wasserstein2: dimension mismatch");
  if (a.rows() != b.rows())
    throw DomainError("wasserstein2: exact assignment needs equal sample counts");
  const std::size_t n = a.rows(), d = a.cols();
  if (n > 2048) throw DomainError("wasserstein2: exact assignment capped at 2048 points");
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i * n + j] = sqdist(a.data() + i * d, b.data() + j * d, d);
  return std::sqrt(solve_assignment(cost, n) / double(n));
}

double mode_coverage(const tg::Tensor& samples, const tg::Tensor& centers, double radius) {
  check_points(samples, "mode coverage");
  check_points(centers, "mode coverage");
  if (samples.cols() != centers.cols()) throw ShapeError("mode coverage: dimension mismatch");
  if (!(radius > 0.0)) throw DomainError("mode coverage: radius must be positive");
  const std::size_t n = samples.rows(), m = centers.rows(), d = samples.cols();
  const double r2 = radius * radius;
  std::size_t hit = 0;
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      if (sqdist(samples.data() + i * d, centers.data() + c * d, d) <= r2) {
        ++hit;
        break;
      }
    }
  }
  return double(hit) / double(m);
}

}  // namespace ddss
