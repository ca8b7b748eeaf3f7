#pragma once

#include <complex>
#include <string>
#include <vector>

namespace smlab {

using cplx = std::complex<double>;
using Vec = std::vector<double>;
using CVec = std::vector<cplx>;

// Behaviour of a radial field as r -> 0, used to fill the two ghost values
// that the centered stencils need at the inner edge of the grid.
//   kEven:      f = a + b r^2
//   kOdd:       f = c r + d r^3
//   kQuadratic: f = b r^2 + e r^4
//   kNone:      no assumption, one-sided stencils are used instead
enum class Parity { kNone, kEven, kOdd, kQuadratic };

// Log-uniform radial grid carrying quadrature weights for the measure r dr.
// Nodes are r_j = exp(s_min + j ds). The weights come from the trapezoidal
// rule in s = log r applied to r^2 f, closed at the inner end by assuming f
// constant on [0, r_min] and at the outer end by assuming f ~ r^-4.
class RadialGrid {
 public:
  RadialGrid() = default;

  static RadialGrid log_uniform(double r_min, double r_max, int n);

  int size() const { return static_cast<int>(r_.size()); }
  double r(int j) const { return r_[j]; }
  double s(int j) const { return s_min_ + j * ds_; }
  const Vec& nodes() const { return r_; }
  const Vec& weights() const { return w_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  double ds() const { return ds_; }
  double s_min() const { return s_min_; }

  // Fractional node index of radius r (may lie outside [0, n-1]).
  double index_of(double r) const;
  // First node with r_j >= r, or size() if none.
  int first_node_at_or_above(double r) const;

  // Stable 16-hex-digit identifier of (kind, r_min, r_max, n).
  std::string hash() const;

 private:
  double r_min_ = 0, r_max_ = 0, s_min_ = 0, ds_ = 0;
  Vec r_, w_;
};

// 16-hex-digit FNV-1a digest of a key string.
std::string stable_hash(const std::string& key);

// Quadrature of f against r dr.
double integrate(const RadialGrid& g, const Vec& f);
cplx integrate(const RadialGrid& g, const CVec& f);
// <f, g> = sum_j w_j conj(f_j) g_j.
double inner(const RadialGrid& g, const Vec& f, const Vec& h);
cplx inner(const RadialGrid& g, const CVec& f, const CVec& h);
double l2_norm(const RadialGrid& g, const Vec& f);
double l2_norm(const RadialGrid& g, const CVec& f);
double sup_norm(const Vec& f);
double sup_norm(const CVec& f);

// Fourth-order finite differences in s = log r.
template <class T>
std::vector<T> d_ds(const RadialGrid& g, const std::vector<T>& f, Parity p);
template <class T>
std::vector<T> d2_ds2(const RadialGrid& g, const std::vector<T>& f, Parity p);
// d/dr = r^-1 d/ds.
template <class T>
std::vector<T> d_dr(const RadialGrid& g, const std::vector<T>& f, Parity p);

// Six-point Lagrange interpolation in s at radius r (inside the grid).
template <class T>
T interpolate(const RadialGrid& g, const std::vector<T>& f, double r);
// Cubic Lagrange value at the midpoint s_j + ds/2 for j in [0, n-2].
template <class T>
T midpoint_value(const std::vector<T>& f, int j);

// I_j = int_{s_j}^{s_max} h(s) ds with a fourth-order interval rule, for
// j >= j_lo (entries below j_lo are zero and h there is not read).
template <class T>
std::vector<T> cumulative_from_right(const RadialGrid& g, const std::vector<T>& h, int j_lo = 0);

// L = d_r + h3/r, L* = -d_r + (h3 - 1)/r, H = L*L, H~ = LL*, and
// H~_lambda = -Delta + lambda^2 V~(lambda r). All potentials are evaluated
// analytically at the nodes.
template <class T>
std::vector<T> apply_L(const RadialGrid& g, const std::vector<T>& f, Parity p = Parity::kNone);
template <class T>
std::vector<T> apply_Lstar(const RadialGrid& g, const std::vector<T>& f, Parity p = Parity::kNone);
template <class T>
std::vector<T> apply_H(const RadialGrid& g, const std::vector<T>& f, Parity p = Parity::kOdd);
template <class T>
std::vector<T> apply_Ht(const RadialGrid& g, const std::vector<T>& f, Parity p = Parity::kQuadratic);
template <class T>
std::vector<T> apply_Ht_lambda(const RadialGrid& g, const std::vector<T>& f, double lambda,
                               Parity p = Parity::kQuadratic);

// [r d_r]^-1 f (r) = - int_r^inf f(s) ds / s. The part beyond r_max is closed
// by fitting f ~ c r^-p on the last decade; p <= 1 is refused. A tail that is
// negligible against the bulk of f contributes nothing.
template <class T>
std::vector<T> r_dr_inverse(const RadialGrid& g, const std::vector<T>& f);

}  // namespace smlab
