#pragma once

#include <cmath>

#include "smlab/grid.hpp"
#include "smlab/profiles.hpp"
#include "smlab/soliton.hpp"

namespace testing_support {

using namespace smlab;

inline double log_bump(double r, double r0, double width) {
  const double x = std::log(r / r0) / width;
  return std::exp(-0.5 * x * x);
}

// normalize(Q + f1 v_Q + f2 w_Q) with v_Q = (h3, 0, -h1) and w_Q = (0, 1, 0).
inline SphereProfile perturbed_q(const RadialGrid& g, double a1, double a2, double r1 = 1.0, double r2 = 2.0) {
  SphereProfile u;
  u.u1.resize(g.size());
  u.u2.resize(g.size());
  u.u3.resize(g.size());
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j);
    const double f1 = a1 * log_bump(r, r1, 0.7), f2 = a2 * log_bump(r, r2, 0.5);
    double x = h1(r) + f1 * h3(r), y = f2, z = h3(r) - f1 * h1(r);
    const double n = std::sqrt(x * x + y * y + z * z);
    u.u1[j] = x / n;
    u.u2[j] = y / n;
    u.u3[j] = z / n;
  }
  return u;
}

template <class T>
double max_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double e = 0.0;
  for (size_t j = 0; j < a.size(); ++j) e = std::max(e, std::abs(a[j] - b[j]));
  return e;
}

inline double max_diff(const SphereProfile& a, const SphereProfile& b) {
  return std::max({max_diff(a.u1, b.u1), max_diff(a.u2, b.u2), max_diff(a.u3, b.u3)});
}

}  // namespace testing_support
