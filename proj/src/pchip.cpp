#include "ddss/pchip.hpp"

#include <cmath>

#include "ddss/errors.hpp"

namespace ddss {

Pchip::Pchip(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw DomainError("pchip: need >=2 knots, matching x/y sizes");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw DomainError("pchip: knots must be strictly increasing");

  std::vector<double> h(n - 1), d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    d[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  m_.assign(n, 0.0);
  m_[0] = d[0];
  m_[n - 1] = d[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (d[i - 1] == 0.0 || d[i] == 0.0 || (d[i - 1] > 0) != (d[i] > 0)) {
      m_[i] = 0.0;
    } else {
      // harmonic mean weighted by interval widths (Fritsch-Carlson)
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }
  // clamp end slopes to preserve monotonicity near the boundary
  auto limit_end = [](double m, double dfirst) {
    if (dfirst == 0.0) return 0.0;
    if ((m > 0) != (dfirst > 0)) return 0.0;
    if (std::abs(m) > 3.0 * std::abs(dfirst)) return 3.0 * dfirst;
    return m;
  };
  m_[0] = limit_end(m_[0], d[0]);
  m_[n - 1] = limit_end(m_[n - 1], d[n - 2]);
}

std::size_t Pchip::segment(double t) const {
  // rightmost i with x_[i] <= t, clamped to a valid segment start
  std::size_t lo = 0, hi = x_.size() - 1;
  if (t <= x_[0]) return 0;
  if (t >= x_[hi]) return hi - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    (x_[mid] <= t ? lo : hi) = mid;
  }
  return lo;
}

double Pchip::eval(double t) const {
  const std::size_t n = x_.size();
  if (t < x_[0]) return y_[0] + m_[0] * (t - x_[0]);
  if (t > x_[n - 1]) return y_[n - 1] + m_[n - 1] * (t - x_[n - 1]);
  const std::size_t i = segment(t);
  const double h = x_[i + 1] - x_[i];
  const double s = (t - x_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
}

double Pchip::deriv(double t) const {
  const std::size_t n = x_.size();
  if (t < x_[0]) return m_[0];
  if (t > x_[n - 1]) return m_[n - 1];
  const std::size_t i = segment(t);
  const double h = x_[i + 1] - x_[i];
  const double s = (t - x_[i]) / h;
  const double s2 = s * s;
  const double dh00 = (6 * s2 - 6 * s) / h;
  const double dh10 = 3 * s2 - 4 * s + 1;
  const double dh01 = (-6 * s2 + 6 * s) / h;
  const double dh11 = 3 * s2 - 2 * s;
  return dh00 * y_[i] + dh10 * m_[i] + dh01 * y_[i + 1] + dh11 * m_[i + 1];
}

}  // namespace ddss
