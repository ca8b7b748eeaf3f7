#pragma once

#include <cmath>

namespace smlab {

// Closed-form profiles of the ground-state harmonic map of class m:
//   h1(r) = 2 r^m / (r^{2m} + 1),   h3(r) = (r^{2m} - 1) / (r^{2m} + 1).
// Written in terms of x = r^m and evaluated so that h1^2 + h3^2 = 1 holds to
// rounding at both ends of the radial range.
inline double h1_profile(int m, double r) {
  const double x = std::pow(r, m);
  return x <= 1.0 ? 2.0 * x / (x * x + 1.0) : 2.0 / (x + 1.0 / x);
}

inline double h3_profile(int m, double r) {
  const double x = std::pow(r, m);
  return x <= 1.0 ? (x * x - 1.0) / (x * x + 1.0) : (1.0 - 1.0 / (x * x)) / (1.0 + 1.0 / (x * x));
}

// r dh1/dr and r dh3/dr for class m.
inline double rdh1_profile(int m, double r) {
  const double x = std::pow(r, m);
  const double d = x * x + 1.0;
  return 2.0 * m * x * (1.0 - x * x) / (d * d);
}

inline double rdh3_profile(int m, double r) {
  const double x = std::pow(r, m);
  const double d = x * x + 1.0;
  return 4.0 * m * x * x / (d * d);
}

// m = 1 shorthands used by the operators L, L*, H and H~.
inline double h1(double r) { return h1_profile(1, r); }
inline double h3(double r) { return h3_profile(1, r); }

// 1 - h3 = 2 / (1 + r^2), computed without cancellation.
inline double one_minus_h3(double r) { return 2.0 / (1.0 + r * r); }

// Zero resonance of H and its L* preimage:
//   phi0 = h1,   psi0 = ((1 + r^2) log(1 + r^2) / r^2 - 1) / 2.
inline double phi0(double r) { return h1(r); }

inline double psi0(double r) {
  const double x = r * r;
  if (x < 1e-3) {
    // Series of ((1+x) log(1+x)/x - 1)/2 = x/4 - x^2/12 + x^3/24 - x^4/40 + ...
    return x / 4.0 - x * x / 12.0 + x * x * x / 24.0 - x * x * x * x / 40.0;
  }
  return 0.5 * ((1.0 + x) * std::log1p(x) / x - 1.0);
}

}  // namespace smlab
