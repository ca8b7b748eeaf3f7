#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "smlab/grid.hpp"

namespace smlab {

// Build parameters of an eigenfunction table.
struct TableParams {
  // Dyadic bands k_min..k_max; nodes cover [2^(k_min-1), 2^(k_max+1)].
  int k_min = -10;
  int k_max = 6;
  int per_octave = 64;
  // Resolvability taper in x = xi r: 1 up to kappa1, 0 from kappa2.
  double kappa1 = 150.0;
  double kappa2 = 300.0;
  // Bessel matching radius R(xi) = min(r_max, max(r_match_min, r_match_cycles / xi)).
  double r_match_min = 100.0;
  double r_match_cycles = 200.0;
  // Relative tolerance of the radial ODE solves.
  double rtol = 1e-12;
};

// Which operator the transform diagonalises: H (eigenfunctions phi_xi) or
// H~ (eigenfunctions psi_xi = xi^-1 L phi_xi).
enum class Frame { kH, kHt };

// Generalized eigenfunctions of H on a radial grid. phi_xi is the regular
// solution of H phi = xi^2 phi normalised to the far-field form
// sqrt(2/pi) r^-1/2 cos(xi r + theta), i.e. phi = a J1(xi r) + b Y1(xi r) with
// a^2 + b^2 = xi beyond the matching radius.
class EigenTable {
 public:
  EigenTable() = default;

  static EigenTable build(const RadialGrid& g, const TableParams& p = {});
  // Table on explicit nodes (ascending). Quadrature weights in xi are the
  // trapezoidal rule in log xi.
  static EigenTable build_on(const RadialGrid& g, const Vec& xi, const TableParams& p = {});

  void save(const std::string& path) const;
  static EigenTable load(const std::string& path);
  // Identifier of (grid, build parameters) used for caching and provenance.
  static std::string table_hash(const RadialGrid& g, const TableParams& p);
  // Conventional cache file name for (grid, params) inside dir.
  static std::string cache_path(const std::string& dir, const RadialGrid& g, const TableParams& p);

  const RadialGrid& grid() const { return grid_; }
  const TableParams& params() const { return params_; }
  const std::string& hash() const { return hash_; }
  int size() const { return static_cast<int>(xi_.size()); }
  const Vec& xi() const { return xi_; }
  const Vec& xi_weights() const { return wxi_; }
  // q(xi): phi_xi = q(xi) (phi0(r) + O(r^3)) as r -> 0.
  const Vec& q() const { return q_; }
  // Far-field coefficients: phi_xi = a J1 + b Y1 beyond the matching radius.
  const Vec& bessel_a() const { return a_; }
  const Vec& bessel_b() const { return b_; }
  // Raw samples phi_xi(r_j), psi_xi(r_j) for j < stored(i); zero beyond.
  int stored(int i) const { return static_cast<int>(phi_[i].size()); }
  const Vec& phi_row(int i) const { return phi_[i]; }
  const Vec& psi_row(int i) const { return psi_[i]; }
  // Number of nodes on which the transform row of xi_i is nonzero.
  int extent(int i) const { return ext_[i]; }
  // Full-length copies of the raw rows (zero-padded).
  Vec phi_full(int i) const;
  Vec psi_full(int i) const;

  // F f(xi_i) = sum_j w_j e_i(r_j) f(r_j) with e = phi (H) or psi (H~),
  // windowed in r and tapered in xi r.
  CVec forward(const CVec& f, Frame fr) const;
  // f(r_j) = sum_i wxi_i e_i(r_j) c_i.
  CVec inverse(const CVec& c, Frame fr) const;
  Vec forward(const Vec& f, Frame fr) const;
  Vec inverse(const Vec& c, Frame fr) const;

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // Transform rows (one per xi, zero beyond extent(i)) over the first
  // transform_columns() grid nodes.
  const RowMatrix& transform_matrix(Frame fr) const { return fr == Frame::kH ? tphi_ : tpsi_; }
  int transform_columns() const { return static_cast<int>(tphi_.cols()); }

  // (sum_i wxi_i |c_i|^2)^{1/2}.
  double coeff_norm(const CVec& c) const;
  double coeff_norm(const Vec& c) const;

 private:
  void finalize();

  RadialGrid grid_;
  TableParams params_;
  std::string hash_;
  Vec xi_, wxi_, q_, a_, b_;
  std::vector<Vec> phi_, psi_;
  // Transform rows (raw rows times r-window times xi r taper), dense over the
  // first max(extent) nodes.
  std::vector<int> ext_;
  RowMatrix tphi_, tpsi_;
};

// Smooth dyadic partition of unity in x = log2 xi: chi_k = 1 on
// [k - 1/4, k + 1/4], supported in (k - 3/4, k + 3/4). The end bands k_min and
// k_max absorb everything below and above.
double lp_bump(double xi, int k, int k_min, int k_max);

// Coefficients of f restricted to band k and transformed back.
CVec lp_project(const EigenTable& t, const CVec& f, int k, Frame fr);

// ||P_k f|| for every tabulated band, computed in coefficient space.
Vec band_norms(const EigenTable& t, const CVec& coeffs);

// ||u||_X = (sum_{k>=0} 4^k ||P_k^H u||^2)^{1/2} + sum_{k<0} |k|^-1 ||P_k^H u||.
double norm_X(const EigenTable& t, const CVec& u);
double norm_X_coeffs(const EigenTable& t, const CVec& coeffs_H);
// ||f||_LX = ||u||_X where F_H u = xi^-1 F_H~ f (so that ||L u||_LX = ||u||_X).
double norm_LX(const EigenTable& t, const CVec& f);
double norm_LX_coeffs(const EigenTable& t, const CVec& coeffs_Ht);

// Fraction of ||f||^2 not captured by the tabulated coefficients.
double truncated_mass_fraction(const EigenTable& t, const CVec& f, Frame fr);

// F(xi_i, xi_l) = <(1 + r^2)^-2 psi_xi, psi_eta>.
double transference_F(const EigenTable& t, int i, int l);

// Row r = r_j of the kernel of P_k: K_k(r_j, r_l) = sum_i wxi_i chi_k(xi_i) e_i(r_j) e_i(r_l).
Vec lp_kernel_row(const EigenTable& t, int k, int j, Frame fr);

// Eigen-equation and conjugation residuals of one tabulated xi, measured with
// finite differences on the nodes where they resolve the oscillation.
struct EigenResidual {
  double xi = 0.0;
  double eigen = 0.0;        // ||H phi - xi^2 phi|| / ||phi||
  double conjugation = 0.0;  // ||L phi - xi psi|| / ||psi||
  int j_lo = 0, j_hi = 0;    // node window used
};
EigenResidual eigen_residual(const EigenTable& t, int i);

}  // namespace smlab
