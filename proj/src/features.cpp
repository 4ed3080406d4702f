#include "ddss/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ddss/errors.hpp"
#include "ddss/rng.hpp"

namespace ddss {

FeatureMap make_identity_features(std::size_t d) {
  if (d == 0) throw ShapeError("identity features: dimension must be positive");
  FeatureMap f;
  f.kind = FeatureMap::identity;
  f.in_dim = d;
  f.out_dim = d;
  return f;
}

FeatureMap make_rff_features(std::size_t d, std::size_t m, double lengthscale,
                             std::uint64_t seed) {
  if (d == 0) throw ShapeError("rff features: input dimension must be positive");
  if (m < 2 || m % 2 != 0)
    throw ShapeError("rff features: feature count must be even and >= 2");
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw DomainError("rff features: lengthscale must be positive and finite");
  FeatureMap f;
  f.kind = FeatureMap::random_fourier;
  f.in_dim = d;
  f.out_dim = m;
  f.lengthscale = lengthscale;
  const std::size_t half = m / 2;
  f.wt = tg::Tensor::zeros({d, half});
  NoiseStream rng(seed);
  double* w = f.wt.mut();
  // entry (i,k) = frequency k, input dim i; keyed by flat index so the draw
  // is independent of storage layout
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < half; ++k)
      w[i * half + k] =
          rng.gaussian(NoiseStream::param, 0, k * d + i) / lengthscale;
  f.phase = tg::Tensor::zeros({1, half});
  return f;
}

FeatureMap make_file_features(tg::Tensor table) {
  if (!table.defined() || table.rank() != 2 || table.rows() == 0 || table.cols() == 0)
    throw ShapeError("file features: table must be a non-empty [count x m] matrix");
  FeatureMap f;
  f.kind = FeatureMap::file_backed;
  f.in_dim = 0;
  f.out_dim = table.cols();
  f.table = std::move(table);
  return f;
}

double median_pairwise_distance(const tg::Tensor& pts) {
  if (!pts.defined() || pts.rank() != 2)
    throw ShapeError("median pairwise distance: expected [n x d] matrix");
  const std::size_t n = pts.rows(), d = pts.cols();
  if (n < 2) throw DomainError("median pairwise distance: need at least 2 points");
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  const double* p = pts.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = p[i * d + k] - p[j * d + k];
        s += diff * diff;
      }
      dist.push_back(std::sqrt(s));
    }
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + mid, dist.end());
  return dist[mid];
}

tg::Value apply_features(tg::Tape& tp, const FeatureMap& f, tg::Value x) {
  const tg::Tensor& xv = tp.val(x);
  if (!xv.defined() || xv.rank() != 2)
    throw ShapeError("apply features: expected [n x d] batch");
  switch (f.kind) {
    case FeatureMap::identity:
      if (xv.cols() != f.in_dim)
        throw ShapeError("apply features: batch dim does not match feature map");
      return x;
    case FeatureMap::random_fourier: {
      if (xv.cols() != f.in_dim)
        throw ShapeError("apply features: batch dim does not match feature map");
      tg::Value z = tp.matmul(x, tp.constant(f.wt));
      z = tp.add(z, tp.constant(f.phase));
      tg::Value both = tp.concat({tp.cos(z), tp.sin(z)}, 1);
      return tp.scale(both, std::sqrt(2.0 / double(f.out_dim)));
    }
    case FeatureMap::file_backed:
      throw UsageError(
          "file-backed features cannot embed generated samples (they have no "
          "row index); use identity or rff features instead");
  }
  throw Error("apply features: unreachable");
}

tg::Tensor apply_features(const FeatureMap& f, const tg::Tensor& x) {
  if (f.kind == FeatureMap::identity) {
    if (!x.defined() || x.rank() != 2 || x.cols() != f.in_dim)
      throw ShapeError("apply features: expected [n x d] batch");
    return x;
  }
  tg::Tape tp;
  return tp.val(apply_features(tp, f, tp.constant(x)));
}

tg::Tensor lookup_features(const FeatureMap& f, const std::vector<std::size_t>& rows) {
  if (f.kind != FeatureMap::file_backed)
    throw UsageError("feature lookup by row only applies to file-backed features");
  const std::size_t m = f.table.cols(), count = f.table.rows();
  tg::Tensor out = tg::Tensor::zeros({rows.size(), m});
  double* o = out.mut();
  const double* t = f.table.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= count) throw ShapeError("feature lookup: row index out of range");
    std::memcpy(o + i * m, t + rows[i] * m, m * sizeof(double));
  }
  return out;
}

}  // namespace ddss
