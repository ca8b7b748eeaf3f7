#include "smlab/soliton.hpp"

#include <cmath>

#include "smlab/error.hpp"
#include "smlab/profiles.hpp"

namespace smlab {

namespace {

void check_params(const SolitonParams& p) {
  require(p.m >= 1, "equivariance class m must be at least 1");
  require(p.lambda > 0.0 && std::isfinite(p.lambda), "soliton scale must be positive");
  require(std::isfinite(p.alpha), "soliton angle must be finite");
}

}  // namespace

void h_profiles(int m, const RadialGrid& g, Vec& h1, Vec& h3) {
  require(m >= 1, "equivariance class m must be at least 1");
  h1.resize(g.size());
  h3.resize(g.size());
  for (int j = 0; j < g.size(); ++j) {
    h1[j] = h1_profile(m, g.r(j));
    h3[j] = h3_profile(m, g.r(j));
  }
}

SphereProfile soliton_profile(const SolitonParams& p, const RadialGrid& g) {
  check_params(p);
  SphereProfile u;
  u.u1.resize(g.size());
  u.u2.resize(g.size());
  u.u3.resize(g.size());
  const double c = std::cos(p.alpha), s = std::sin(p.alpha);
  for (int j = 0; j < g.size(); ++j) {
    const double x = p.lambda * g.r(j);
    const double a = h1_profile(p.m, x);
    u.u1[j] = a * c;
    u.u2[j] = a * s;
    u.u3[j] = h3_profile(p.m, x);
  }
  return u;
}

SolitonFields soliton_gauge_fields(const SolitonParams& p, const RadialGrid& g) {
  check_params(p);
  SolitonFields f;
  f.psi1.resize(g.size());
  f.psi2.resize(g.size());
  f.A2.resize(g.size());
  const cplx phase = std::polar(1.0, p.m * p.alpha);
  const cplx I(0.0, 1.0);
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j), x = p.lambda * r;
    const double a = h1_profile(p.m, x);
    f.psi1[j] = -double(p.m) * a / r * phase;
    f.psi2[j] = I * double(p.m) * a * phase;
    f.A2[j] = p.m * h3_profile(p.m, x);
  }
  return f;
}

double sphere_defect(const SphereProfile& u) {
  double d = 0.0;
  for (int j = 0; j < u.size(); ++j)
    d = std::max(d, std::fabs(u.u1[j] * u.u1[j] + u.u2[j] * u.u2[j] + u.u3[j] * u.u3[j] - 1.0));
  return d;
}

Parity horizontal_parity(int m) {
  if (m == 1) return Parity::kOdd;
  if (m == 2) return Parity::kQuadratic;
  return Parity::kNone;
}

double energy(const RadialGrid& g, const SphereProfile& u, int m, bool* divergent) {
  require(m >= 1, "equivariance class m must be at least 1");
  require(u.size() == g.size(), "profile length does not match grid");
  const Parity ph = horizontal_parity(m);
  const Vec d1 = d_dr(g, u.u1, ph);
  const Vec d2 = d_dr(g, u.u2, ph);
  const Vec d3 = d_dr(g, u.u3, Parity::kEven);
  Vec dens(g.size());
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j);
    dens[j] = d1[j] * d1[j] + d2[j] * d2[j] + d3[j] * d3[j] +
              m * m * (u.u1[j] * u.u1[j] + u.u2[j] * u.u2[j]) / (r * r);
  }
  if (divergent) {
    const int n = g.size() - 1;
    const double hor0 = u.u1[0] * u.u1[0] + u.u2[0] * u.u2[0];
    const double horn = u.u1[n] * u.u1[n] + u.u2[n] * u.u2[n];
    *divergent = hor0 > 1e-4 || horn > 1e-4;
  }
  return M_PI * integrate(g, dens);
}

double soliton_energy(const SolitonParams& p, const RadialGrid& g) {
  check_params(p);
  Vec dens(g.size());
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j), x = p.lambda * r;
    // d_r h(lambda r) = (x h'(x)) / r.
    const double a = rdh1_profile(p.m, x) / r;
    const double b = rdh3_profile(p.m, x) / r;
    const double h = h1_profile(p.m, x);
    dens[j] = a * a + b * b + p.m * p.m * h * h / (r * r);
  }
  return M_PI * integrate(g, dens);
}

double hdot1_distance(const RadialGrid& g, const SphereProfile& u, const SphereProfile& v, int m) {
  require(u.size() == g.size() && v.size() == g.size(), "profile length does not match grid");
  Vec e1(g.size()), e2(g.size()), e3(g.size());
  for (int j = 0; j < g.size(); ++j) {
    e1[j] = u.u1[j] - v.u1[j];
    e2[j] = u.u2[j] - v.u2[j];
    e3[j] = u.u3[j] - v.u3[j];
  }
  const Parity ph = horizontal_parity(m);
  const Vec d1 = d_dr(g, e1, ph), d2 = d_dr(g, e2, ph), d3 = d_dr(g, e3, Parity::kEven);
  Vec dens(g.size());
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j);
    dens[j] = d1[j] * d1[j] + d2[j] * d2[j] + d3[j] * d3[j] + m * m * (e1[j] * e1[j] + e2[j] * e2[j]) / (r * r);
  }
  return std::sqrt(std::max(0.0, integrate(g, dens)));
}

}  // namespace smlab
