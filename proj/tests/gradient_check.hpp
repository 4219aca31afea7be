#pragma once

#include <algorithm>
#include <cmath>

// Five-point central difference of f at *p.
template <typename Fn>
double central_difference(Fn&& f, double* p, double h) {
  const double x = *p;
  *p = x + 2 * h;
  const double a2 = f();
  *p = x + h;
  const double a1 = f();
  *p = x - h;
  const double b1 = f();
  *p = x - 2 * h;
  const double b2 = f();
  *p = x;
  return (-a2 + 8 * a1 - 8 * b1 + b2) / (12 * h);
}

// Relative 1e-4 agreement with an absolute floor of 1e-8.
inline bool gradients_agree(double analytic, double numeric) {
  return std::abs(analytic - numeric) <= std::max(1e-8, 1e-4 * std::max(std::abs(analytic), std::abs(numeric)));
}
