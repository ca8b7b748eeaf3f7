#pragma once

#include <vector>

#include <Eigen/Core>

#include "smlab/grid.hpp"
#include "smlab/soliton.hpp"

namespace smlab {

// Per-node orthogonal matrix with columns (v, w, u).
struct CoulombFrame {
  std::vector<Eigen::Matrix3d> O;
  int size() const { return static_cast<int>(O.size()); }
};

struct GaugeFields {
  CVec psi1, psi2, psi;
  Vec A2, A0;
  int size() const { return static_cast<int>(psi.size()); }
};

enum class ModulationVariant { kAnalytic, kGeometric };

struct ModulationParams {
  double alpha = 0.0;
  double lambda = 1.0;
  ModulationVariant variant = ModulationVariant::kAnalytic;
};

struct FrameOptions {
  // Rotation of (v, w) about u at r_max. Zero selects the limit frame.
  double theta = 0.0;
  // Largest admitted distance from the nearest soliton.
  double max_soliton_distance = 0.3;
  // Equivariance class of the profile (selects the comparison soliton and
  // the small-r behaviour of the horizontal components).
  int m = 1;
};

// Frame of an m-equivariant profile with d_r O = M O, M = d_r u ^ u, integrated
// inward from r_max. The starting frame is the smallest rotation taking
// k to u(r_max), optionally followed by a rotation by theta about u.
CoulombFrame coulomb_frame(const RadialGrid& g, const SphereProfile& u, const FrameOptions& opt = {});

// psi1 = d_r u . v + i d_r u . w, psi2 = m (w3 - i v3), A2 = m u3,
// psi = psi1 - i psi2 / r and A0 from compute_A0.
GaugeFields derive_fields(const RadialGrid& g, const SphereProfile& u, const CoulombFrame& frame, int m = 1);

// A0 = -|psi|^2/2 + Im(psi2 conj(psi))/r - [r d_r]^-1 (|psi|^2 - 2 Im(psi2 conj(psi))/r),
// the solution of d_r A0 = -(1/2r^2) d_r (r^2 |psi1|^2 - |psi2|^2) vanishing at infinity.
Vec compute_A0(const RadialGrid& g, const CVec& psi, const CVec& psi2);

struct ReconstructOptions {
  // Picard matching radius; the first node at or above it is used.
  double r_match = 50.0;
  double picard_tol = 1e-10;
  int picard_max_iter = 200;
  // LX-type norm of psi when the caller has it (negative means unknown), and
  // the largest admitted value.
  double lx_norm = -1.0;
  double lx_limit = 0.1;
};

struct ReconstructedFields {
  CVec psi2;
  Vec A2;
};

// Solves d_r A2 = Im(psi conj(psi2)) + |psi2|^2 / r, d_r psi2 = i A2 psi - A2 psi2 / r
// with psi2 - i h1 -> 0 and A2 -> 1 at infinity.
ReconstructedFields reconstruct_fields(const RadialGrid& g, const CVec& psi, const ReconstructOptions& opt = {});

// Full field set (psi1, psi2, psi, A2, A0) rebuilt from psi alone.
GaugeFields fields_from_psi(const RadialGrid& g, const CVec& psi, const ReconstructOptions& opt = {});

struct ReconstructedMap {
  SphereProfile u;
  CoulombFrame frame;
};

// Integrates d_r O = O R(psi1) inward and reads u as the last column. The last
// row must reproduce (-Im psi2, Re psi2, A2).
ReconstructedMap reconstruct_map(const RadialGrid& g, const GaugeFields& fields);

// Analytic variant: A2(r*) = h3(lambda r*), psi2(r*) = i e^{i alpha} h1(lambda r*).
ModulationParams modulation_params(const RadialGrid& g, const GaugeFields& fields, double r_star = 1.0);
// Geometric variant: u(r*) = Q_{alpha, lambda}(r*).
ModulationParams modulation_params_geometric(const RadialGrid& g, const SphereProfile& u, double r_star = 1.0);

// lambda with h3(lambda r*) = a3 by bisection in log lambda.
double solve_scale(double a3, double r_star);

}  // namespace smlab
