#include "smlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>

#include "smlab/error.hpp"
#include "smlab/profiles.hpp"

namespace smlab {

namespace {

double abs_value(double x) { return std::fabs(x); }
double abs_value(const cplx& z) { return std::abs(z); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Two-term small-r model behind each parity hint.
void parity_basis(Parity p, double r, double& b1, double& b2) {
  switch (p) {
    case Parity::kEven: b1 = 1.0; b2 = r * r; break;
    case Parity::kOdd: b1 = r; b2 = r * r * r; break;
    case Parity::kQuadratic: b1 = r * r; b2 = r * r * r * r; break;
    case Parity::kNone: b1 = b2 = 0.0; break;
  }
}

// Values at s_{-1} and s_{-2} from the parity model fitted through the first
// two nodes.
template <class T>
void ghost_values(const RadialGrid& g, const std::vector<T>& f, Parity p, T& gm1, T& gm2) {
  double a0 = 0, b0 = 0, a1 = 0, b1 = 0;
  parity_basis(p, g.r(0), a0, b0);
  parity_basis(p, g.r(1), a1, b1);
  const double det = a0 * b1 - a1 * b0;
  const T ca = (f[0] * b1 - f[1] * b0) / det;
  const T cb = (a0 * f[1] - a1 * f[0]) / det;
  const double rm1 = g.r(0) * std::exp(-g.ds());
  const double rm2 = g.r(0) * std::exp(-2.0 * g.ds());
  double u = 0, v = 0;
  parity_basis(p, rm1, u, v);
  gm1 = ca * u + cb * v;
  parity_basis(p, rm2, u, v);
  gm2 = ca * u + cb * v;
}

}  // namespace

RadialGrid RadialGrid::log_uniform(double r_min, double r_max, int n) {
  if (!(r_min > 0.0) || !(r_min < 1.0) || !(r_max > 1.0) || !std::isfinite(r_max))
    throw ParameterError("log grid needs 0 < r_min < 1 < r_max");
  if (n < 16) throw ParameterError("log grid needs at least 16 nodes");
  RadialGrid g;
  g.r_min_ = r_min;
  g.r_max_ = r_max;
  g.s_min_ = std::log(r_min);
  g.ds_ = (std::log(r_max) - g.s_min_) / (n - 1);
  g.r_.resize(n);
  g.w_.resize(n);
  for (int j = 0; j < n; ++j) {
    g.r_[j] = std::exp(g.s_min_ + j * g.ds_);
    g.w_[j] = g.r_[j] * g.r_[j] * g.ds_;
  }
  g.r_[0] = r_min;
  g.r_[n - 1] = r_max;
  g.w_[0] = 0.5 * r_min * r_min * g.ds_ + 0.5 * r_min * r_min;
  g.w_[n - 1] = 0.5 * r_max * r_max * g.ds_ + 0.5 * r_max * r_max;
  return g;
}

double RadialGrid::index_of(double r) const { return (std::log(r) - s_min_) / ds_; }

int RadialGrid::first_node_at_or_above(double r) const {
  auto it = std::lower_bound(r_.begin(), r_.end(), r);
  return static_cast<int>(it - r_.begin());
}

std::string stable_hash(const std::string& key) {
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(fnv1a(key)));
  return out;
}

std::string RadialGrid::hash() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "log-uniform|%.17g|%.17g|%d", r_min_, r_max_, size());
  return stable_hash(buf);
}

double integrate(const RadialGrid& g, const Vec& f) {
  double s = 0.0;
  for (int j = 0; j < g.size(); ++j) s += g.weights()[j] * f[j];
  return s;
}

cplx integrate(const RadialGrid& g, const CVec& f) {
  cplx s = 0.0;
  for (int j = 0; j < g.size(); ++j) s += g.weights()[j] * f[j];
  return s;
}

double inner(const RadialGrid& g, const Vec& f, const Vec& h) {
  double s = 0.0;
  for (int j = 0; j < g.size(); ++j) s += g.weights()[j] * f[j] * h[j];
  return s;
}

cplx inner(const RadialGrid& g, const CVec& f, const CVec& h) {
  cplx s = 0.0;
  for (int j = 0; j < g.size(); ++j) s += g.weights()[j] * std::conj(f[j]) * h[j];
  return s;
}

double l2_norm(const RadialGrid& g, const Vec& f) { return std::sqrt(std::max(0.0, inner(g, f, f))); }

double l2_norm(const RadialGrid& g, const CVec& f) {
  double s = 0.0;
  for (int j = 0; j < g.size(); ++j) s += g.weights()[j] * std::norm(f[j]);
  return std::sqrt(s);
}

double sup_norm(const Vec& f) {
  double m = 0.0;
  for (double x : f) m = std::max(m, std::fabs(x));
  return m;
}

double sup_norm(const CVec& f) {
  double m = 0.0;
  for (const cplx& x : f) m = std::max(m, std::abs(x));
  return m;
}

template <class T>
std::vector<T> d_ds(const RadialGrid& g, const std::vector<T>& f, Parity p) {
  const int n = g.size();
  if (static_cast<int>(f.size()) != n) throw ParameterError("field length does not match grid");
  const double c = 1.0 / (12.0 * g.ds());
  std::vector<T> d(n);
  for (int j = 2; j < n - 2; ++j)
    d[j] = c * (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]);
  if (p == Parity::kNone) {
    d[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    d[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
  } else {
    T gm1, gm2;
    ghost_values(g, f, p, gm1, gm2);
    d[0] = c * (gm2 - 8.0 * gm1 + 8.0 * f[1] - f[2]);
    d[1] = c * (gm1 - 8.0 * f[0] + 8.0 * f[2] - f[3]);
  }
  d[n - 1] = c * (3.0 * f[n - 5] - 16.0 * f[n - 4] + 36.0 * f[n - 3] - 48.0 * f[n - 2] + 25.0 * f[n - 1]);
  d[n - 2] = c * (-f[n - 5] + 6.0 * f[n - 4] - 18.0 * f[n - 3] + 10.0 * f[n - 2] + 3.0 * f[n - 1]);
  return d;
}

template <class T>
std::vector<T> d2_ds2(const RadialGrid& g, const std::vector<T>& f, Parity p) {
  const int n = g.size();
  if (static_cast<int>(f.size()) != n) throw ParameterError("field length does not match grid");
  const double c = 1.0 / (12.0 * g.ds() * g.ds());
  std::vector<T> d(n);
  for (int j = 2; j < n - 2; ++j)
    d[j] = c * (-f[j - 2] + 16.0 * f[j - 1] - 30.0 * f[j] + 16.0 * f[j + 1] - f[j + 2]);
  if (p == Parity::kNone) {
    d[0] = c * (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]);
    d[1] = c * (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4] + f[5]);
  } else {
    T gm1, gm2;
    ghost_values(g, f, p, gm1, gm2);
    d[0] = c * (-gm2 + 16.0 * gm1 - 30.0 * f[0] + 16.0 * f[1] - f[2]);
    d[1] = c * (-gm1 + 16.0 * f[0] - 30.0 * f[1] + 16.0 * f[2] - f[3]);
  }
  d[n - 1] = c * (-10.0 * f[n - 6] + 61.0 * f[n - 5] - 156.0 * f[n - 4] + 214.0 * f[n - 3] -
                  154.0 * f[n - 2] + 45.0 * f[n - 1]);
  d[n - 2] = c * (f[n - 6] - 6.0 * f[n - 5] + 14.0 * f[n - 4] - 4.0 * f[n - 3] - 15.0 * f[n - 2] +
                  10.0 * f[n - 1]);
  return d;
}

template <class T>
std::vector<T> d_dr(const RadialGrid& g, const std::vector<T>& f, Parity p) {
  std::vector<T> d = d_ds(g, f, p);
  for (int j = 0; j < g.size(); ++j) d[j] /= g.r(j);
  return d;
}

template <class T>
T interpolate(const RadialGrid& g, const std::vector<T>& f, double r) {
  const int n = g.size();
  const double x = g.index_of(r);
  if (x < -1e-9 || x > n - 1 + 1e-9) throw RangeError("interpolation radius outside the grid");
  int i0 = static_cast<int>(std::floor(x)) - 2;
  i0 = std::clamp(i0, 0, n - 6);
  const double t = x - i0;
  T acc = T(0);
  for (int k = 0; k < 6; ++k) {
    double l = 1.0;
    for (int m = 0; m < 6; ++m)
      if (m != k) l *= (t - m) / double(k - m);
    acc += l * f[i0 + k];
  }
  return acc;
}

template <class T>
T midpoint_value(const std::vector<T>& f, int j) {
  const int n = static_cast<int>(f.size());
  if (j <= 0) return (5.0 * f[0] + 15.0 * f[1] - 5.0 * f[2] + f[3]) / 16.0;
  if (j >= n - 2) return (f[n - 4] - 5.0 * f[n - 3] + 15.0 * f[n - 2] + 5.0 * f[n - 1]) / 16.0;
  return (-f[j - 1] + 9.0 * f[j] + 9.0 * f[j + 1] - f[j + 2]) / 16.0;
}

template <class T>
std::vector<T> cumulative_from_right(const RadialGrid& g, const std::vector<T>& h, int j_lo) {
  const int n = g.size();
  if (j_lo < 0 || j_lo > n - 4) throw ParameterError("cumulative integral needs at least four nodes");
  const double c = g.ds() / 24.0;
  std::vector<T> I(n, T(0));
  for (int j = n - 2; j >= j_lo; --j) {
    T piece;
    if (j == j_lo)
      piece = c * (9.0 * h[j] + 19.0 * h[j + 1] - 5.0 * h[j + 2] + h[j + 3]);
    else if (j == n - 2)
      piece = c * (h[n - 4] - 5.0 * h[n - 3] + 19.0 * h[n - 2] + 9.0 * h[n - 1]);
    else
      piece = c * (-h[j - 1] + 13.0 * h[j] + 13.0 * h[j + 1] - h[j + 2]);
    I[j] = I[j + 1] + piece;
  }
  return I;
}

template <class T>
std::vector<T> apply_L(const RadialGrid& g, const std::vector<T>& f, Parity p) {
  std::vector<T> d = d_ds(g, f, p);
  for (int j = 0; j < g.size(); ++j) d[j] = (d[j] + h3(g.r(j)) * f[j]) / g.r(j);
  return d;
}

template <class T>
std::vector<T> apply_Lstar(const RadialGrid& g, const std::vector<T>& f, Parity p) {
  std::vector<T> d = d_ds(g, f, p);
  for (int j = 0; j < g.size(); ++j) d[j] = (-d[j] - one_minus_h3(g.r(j)) * f[j]) / g.r(j);
  return d;
}

template <class T>
std::vector<T> apply_H(const RadialGrid& g, const std::vector<T>& f, Parity p) {
  // H = r^-2 (-d_s^2 + 1) - 8/(1+r^2)^2.
  std::vector<T> d = d2_ds2(g, f, p);
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j), q = 1.0 + r * r;
    d[j] = (f[j] - d[j]) / (r * r) - (8.0 / (q * q)) * f[j];
  }
  return d;
}

template <class T>
std::vector<T> apply_Ht_lambda(const RadialGrid& g, const std::vector<T>& f, double lambda, Parity p) {
  // H~_lambda = r^-2 (-d_s^2 + 4/(1 + lambda^2 r^2)).
  if (!(lambda > 0.0)) throw ParameterError("scale must be positive");
  std::vector<T> d = d2_ds2(g, f, p);
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j);
    d[j] = (4.0 / (1.0 + lambda * lambda * r * r) * f[j] - d[j]) / (r * r);
  }
  return d;
}

template <class T>
std::vector<T> apply_Ht(const RadialGrid& g, const std::vector<T>& f, Parity p) {
  return apply_Ht_lambda(g, f, 1.0, p);
}

template <class T>
std::vector<T> r_dr_inverse(const RadialGrid& g, const std::vector<T>& f) {
  const int n = g.size();
  if (static_cast<int>(f.size()) != n) throw ParameterError("field length does not match grid");
  std::vector<T> I = cumulative_from_right(g, f);

  double bulk = 0.0, tail = 0.0;
  const int j_decade = g.first_node_at_or_above(g.r_max() / 10.0);
  for (int j = 0; j < n; ++j) {
    bulk = std::max(bulk, abs_value(f[j]));
    if (j >= j_decade) tail = std::max(tail, abs_value(f[j]));
  }
  T closure = T(0);
  if (bulk > 0.0 && tail > 1e-10 * bulk) {
    // Least-squares slope of log|f| against log r over the last decade.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (int j = j_decade; j < n; ++j) {
      const double a = abs_value(f[j]);
      if (a <= 0.0) continue;
      const double x = g.s(j), y = std::log(a);
      sx += x; sy += y; sxx += x * x; sxy += x * y;
      ++cnt;
    }
    const double p = cnt > 2 ? -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : 0.0;
    if (!(p > 1.0))
      throw NumericalError("tail extrapolation refused: fitted decay exponent p = " + std::to_string(p) +
                           " is not above 1");
    closure = f[n - 1] / p;
  }
  std::vector<T> out(n);
  for (int j = 0; j < n; ++j) out[j] = -(I[j] + closure);
  return out;
}

#define SMLAB_INSTANTIATE(T)                                                                    \
  template std::vector<T> d_ds(const RadialGrid&, const std::vector<T>&, Parity);              \
  template std::vector<T> d2_ds2(const RadialGrid&, const std::vector<T>&, Parity);            \
  template std::vector<T> d_dr(const RadialGrid&, const std::vector<T>&, Parity);              \
  template T interpolate(const RadialGrid&, const std::vector<T>&, double);                    \
  template T midpoint_value(const std::vector<T>&, int);                                       \
  template std::vector<T> cumulative_from_right(const RadialGrid&, const std::vector<T>&, int);     \
  template std::vector<T> apply_L(const RadialGrid&, const std::vector<T>&, Parity);           \
  template std::vector<T> apply_Lstar(const RadialGrid&, const std::vector<T>&, Parity);       \
  template std::vector<T> apply_H(const RadialGrid&, const std::vector<T>&, Parity);           \
  template std::vector<T> apply_Ht(const RadialGrid&, const std::vector<T>&, Parity);          \
  template std::vector<T> apply_Ht_lambda(const RadialGrid&, const std::vector<T>&, double, Parity); \
  template std::vector<T> r_dr_inverse(const RadialGrid&, const std::vector<T>&);

SMLAB_INSTANTIATE(double)
SMLAB_INSTANTIATE(cplx)

#undef SMLAB_INSTANTIATE

}  // namespace smlab
