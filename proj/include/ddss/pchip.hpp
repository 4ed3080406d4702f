#pragma once
#include <cstddef>
#include <vector>

namespace ddss {

// Monotone piecewise-cubic interpolant (Fritsch-Carlson slope limiting).
// Strictly monotone data stays strictly monotone through the interpolant;
// outside the knot range it continues linearly with the end slopes.
class Pchip {
 public:
  Pchip() = default;
  Pchip(std::vector<double> x, std::vector<double> y);

  double eval(double t) const;
  double deriv(double t) const;
  const std::vector<double>& knots_x() const { return x_; }
  const std::vector<double>& knots_y() const { return y_; }

 private:
  std::size_t segment(double t) const;
  std::vector<double> x_, y_, m_;
};

}  // namespace ddss
