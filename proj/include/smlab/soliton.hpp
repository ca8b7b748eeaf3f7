#pragma once

#include "smlab/grid.hpp"

namespace smlab {

// Parameters of Q^m_{alpha,lambda}(r) = e^{alpha R} Q^m(lambda r).
struct SolitonParams {
  int m = 1;
  double alpha = 0.0;
  double lambda = 1.0;
};

// Radial profile u(r) of an m-equivariant map u(r, theta) = e^{m theta R} u(r).
struct SphereProfile {
  Vec u1, u2, u3;
  int size() const { return static_cast<int>(u3.size()); }
};

// Exact h1^m, h3^m at the nodes.
void h_profiles(int m, const RadialGrid& g, Vec& h1, Vec& h3);

// u(r) = (h1(lambda r) cos alpha, h1(lambda r) sin alpha, h3(lambda r)).
SphereProfile soliton_profile(const SolitonParams& p, const RadialGrid& g);

// Closed-form gauge fields of a soliton:
//   psi1 = -m h1(lambda r) e^{i m alpha} / r,  psi2 = i m h1(lambda r) e^{i m alpha},
//   A2 = m h3(lambda r).
struct SolitonFields {
  CVec psi1, psi2;
  Vec A2;
};
SolitonFields soliton_gauge_fields(const SolitonParams& p, const RadialGrid& g);

// max_j | |u_j|^2 - 1 |.
double sphere_defect(const SphereProfile& u);

// Small-r parity hints of the three components for class m.
Parity horizontal_parity(int m);

// E(u) = pi int (|d_r u|^2 + m^2 (u1^2 + u2^2) / r^2) r dr with finite
// differences for d_r u. When `divergent` is given it is set if u1^2 + u2^2
// does not vanish at either end of the grid.
double energy(const RadialGrid& g, const SphereProfile& u, int m, bool* divergent = nullptr);

// Same functional with the analytic derivatives of the soliton profile.
double soliton_energy(const SolitonParams& p, const RadialGrid& g);

// Equivariant energy-type distance
//   ( int |d_r (u - v)|^2 + m^2 ((u1-v1)^2 + (u2-v2)^2) / r^2  r dr )^{1/2}.
double hdot1_distance(const RadialGrid& g, const SphereProfile& u, const SphereProfile& v, int m = 1);

}  // namespace smlab
