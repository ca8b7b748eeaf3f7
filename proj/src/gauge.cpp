#include "smlab/gauge.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "smlab/error.hpp"
#include "smlab/profiles.hpp"

namespace smlab {

namespace {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

const double kGauss1 = 0.5 - std::sqrt(3.0) / 6.0;
const double kGauss2 = 0.5 + std::sqrt(3.0) / 6.0;
const double kMagnus = std::sqrt(3.0) / 12.0;

// exp of an antisymmetric matrix (Rodrigues).
Mat3 expm_skew(const Mat3& W) {
  const Vec3 w(W(2, 1), W(0, 2), W(1, 0));
  const double t = w.norm();
  if (t < 1e-8) return Mat3::Identity() + W + 0.5 * W * W;
  return Mat3::Identity() + (std::sin(t) / t) * W + ((1.0 - std::cos(t)) / (t * t)) * W * W;
}

// One Newton step towards the orthogonal polar factor.
Mat3 reorthonormalize(const Mat3& O) { return 0.5 * O * (3.0 * Mat3::Identity() - O.transpose() * O); }

double orthogonality_defect(const Mat3& O) { return (O.transpose() * O - Mat3::Identity()).cwiseAbs().maxCoeff(); }

// Smallest rotation taking e3 to the unit vector p.
Mat3 minimal_rotation(const Vec3& p) {
  const double c = p(2);
  if (c <= -1.0 + 1e-12) throw RangeError("far field points to the south pole; no limit frame");
  Mat3 K;
  K << 0.0, 0.0, p(0), 0.0, 0.0, p(1), -p(0), -p(1), 0.0;
  return Mat3::Identity() + K + K * K / (1.0 + c);
}

// Smallest rotation taking the unit vector a to the unit vector b.
Mat3 align(const Vec3& a, const Vec3& b) {
  const Vec3 v = a.cross(b);
  Mat3 K;
  K << 0.0, -v(2), v(1), v(2), 0.0, -v(0), -v(1), v(0), 0.0;
  return Mat3::Identity() + K + K * K / (1.0 + a.dot(b));
}

// Weights of the four-point Lagrange stencil on nodes b..b+3 covering
// position j + t (t in [0, 1]) of an n-node array.
int lagrange4(int n, int j, double t, double w[4]) {
  int b = std::clamp(j - 1, 0, n - 4);
  const double x = j + t - b;
  for (int k = 0; k < 4; ++k) {
    double v = 1.0;
    for (int l = 0; l < 4; ++l)
      if (l != k) v *= (x - l) / double(k - l);
    w[k] = v;
  }
  return b;
}

template <class T>
T lagrange_value(const std::vector<T>& f, int j, double t) {
  double w[4];
  const int b = lagrange4(static_cast<int>(f.size()), j, t, w);
  return w[0] * f[b] + w[1] * f[b + 1] + w[2] * f[b + 2] + w[3] * f[b + 3];
}

// Cubic Hermite value on [s_j, s_j + h] from values and s-derivatives.
double hermite(double f0, double f1, double d0, double d1, double h, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * h * d1;
}

Vec3 at(const SphereProfile& u, int j) { return Vec3(u.u1[j], u.u2[j], u.u3[j]); }

void check_profile(const RadialGrid& g, const SphereProfile& u) {
  require(u.u1.size() == u.u3.size() && u.u2.size() == u.u3.size(), "profile components differ in length");
  require(u.size() == g.size(), "profile length does not match grid");
  if (sphere_defect(u) > 1e-8) throw ParameterError("profile violates the sphere constraint");
}

}  // namespace

double solve_scale(double a3, double r_star) {
  if (!(std::fabs(a3) < 1.0)) throw RangeError(fmt::format("A2 = {} at the matching radius; scale undefined", a3));
  require(r_star > 0.0, "matching radius must be positive");
  // h3(e^t) is strictly increasing in t.
  double lo = -80.0, hi = 80.0;
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    if (h3(std::exp(mid)) < a3)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(0.5 * (lo + hi)) / r_star;
}

CoulombFrame coulomb_frame(const RadialGrid& g, const SphereProfile& u, const FrameOptions& opt) {
  check_profile(g, u);
  const int n = g.size();

  require(opt.m >= 1, "equivariance class m must be at least 1");
  // Distance to the nearest soliton, whose parameters are read off u(1).
  // h3^m(x) = h3^1(x^m), so the class-1 scale at r = 1 is lambda^m.
  const ModulationParams near = modulation_params_geometric(g, u, 1.0);
  const double lambda_m = std::pow(near.lambda, 1.0 / opt.m);
  const double dist = hdot1_distance(g, u, soliton_profile({opt.m, near.alpha, lambda_m}, g), opt.m);
  if (dist > opt.max_soliton_distance)
    throw ParameterError(
        fmt::format("profile is {:.3g} from the nearest soliton (limit {:.3g})", dist, opt.max_soliton_distance));
  if (u.u3[n - 1] < 0.99) throw RangeError("far field is not soliton-like: u3(r_max) < 0.99");

  const Parity ph = horizontal_parity(opt.m);
  const Vec d1 = d_ds(g, u.u1, ph);
  const Vec d2 = d_ds(g, u.u2, ph);
  const Vec d3 = d_ds(g, u.u3, Parity::kEven);
  const double ds = g.ds();

  auto generator = [&](int j, double t) {
    Vec3 uu(hermite(u.u1[j], u.u1[j + 1], d1[j], d1[j + 1], ds, t),
            hermite(u.u2[j], u.u2[j + 1], d2[j], d2[j + 1], ds, t),
            hermite(u.u3[j], u.u3[j + 1], d3[j], d3[j + 1], ds, t));
    uu.normalize();
    const Vec3 du(lagrange_value(d1, j, t), lagrange_value(d2, j, t), lagrange_value(d3, j, t));
    return Mat3(du * uu.transpose() - uu * du.transpose());
  };

  CoulombFrame F;
  F.O.resize(n);
  Mat3 Rz = Mat3::Identity();
  Rz(0, 0) = Rz(1, 1) = std::cos(opt.theta);
  Rz(1, 0) = std::sin(opt.theta);
  Rz(0, 1) = -std::sin(opt.theta);
  F.O[n - 1] = minimal_rotation(at(u, n - 1).normalized()) * Rz;

  const double h = -ds;
  for (int j = n - 2; j >= 0; --j) {
    // Gauss points s_{j+1} + c h lie at fraction 1 - c of [s_j, s_{j+1}].
    const Mat3 A1 = generator(j, 1.0 - kGauss1);
    const Mat3 A2 = generator(j, 1.0 - kGauss2);
    const Mat3 Om = 0.5 * h * (A1 + A2) + kMagnus * h * h * (A2 * A1 - A1 * A2);
    F.O[j] = reorthonormalize(expm_skew(Om) * F.O[j + 1]);
    // Pin the third column to the sampled map so that v and w stay tangent.
    F.O[j] = align(F.O[j].col(2), at(u, j).normalized()) * F.O[j];
    if (orthogonality_defect(F.O[j]) > 1e-6)
      throw NumericalError(fmt::format("frame lost orthogonality at r = {:.4g}", g.r(j)));
  }
  return F;
}

Vec compute_A0(const RadialGrid& g, const CVec& psi, const CVec& psi2) {
  require(static_cast<int>(psi.size()) == g.size() && psi2.size() == psi.size(), "field length does not match grid");
  const int n = g.size();
  Vec inner_part(n), A0(n);
  for (int j = 0; j < n; ++j) {
    const double r = g.r(j);
    const double im = std::imag(psi2[j] * std::conj(psi[j]));
    const double a = std::norm(psi[j]);
    inner_part[j] = a - 2.0 * im / r;
    A0[j] = -0.5 * a + im / r;
  }
  const Vec tail = r_dr_inverse(g, inner_part);
  for (int j = 0; j < n; ++j) A0[j] -= tail[j];
  return A0;
}

GaugeFields derive_fields(const RadialGrid& g, const SphereProfile& u, const CoulombFrame& frame, int m) {
  check_profile(g, u);
  require(frame.size() == g.size(), "frame length does not match grid");
  require(m >= 1, "equivariance class m must be at least 1");
  const int n = g.size();
  const Parity ph = horizontal_parity(m);
  const Vec d1 = d_dr(g, u.u1, ph);
  const Vec d2 = d_dr(g, u.u2, ph);
  const Vec d3 = d_dr(g, u.u3, Parity::kEven);
  GaugeFields f;
  f.psi1.resize(n);
  f.psi2.resize(n);
  f.psi.resize(n);
  f.A2.resize(n);
  const cplx I(0.0, 1.0);
  for (int j = 0; j < n; ++j) {
    const Mat3& O = frame.O[j];
    const Vec3 du(d1[j], d2[j], d3[j]);
    f.psi1[j] = cplx(du.dot(O.col(0)), du.dot(O.col(1)));
    f.psi2[j] = double(m) * cplx(O(2, 1), -O(2, 0));
    f.A2[j] = m * u.u3[j];
    f.psi[j] = f.psi1[j] - I * f.psi2[j] / g.r(j);
  }
  f.A0 = compute_A0(g, f.psi, f.psi2);
  return f;
}

ReconstructedFields reconstruct_fields(const RadialGrid& g, const CVec& psi, const ReconstructOptions& opt) {
  require(static_cast<int>(psi.size()) == g.size(), "field length does not match grid");
  if (opt.lx_norm >= 0.0 && opt.lx_norm > opt.lx_limit)
    throw ParameterError(fmt::format("LX norm {:.3g} of psi exceeds the smallness limit {:.3g}", opt.lx_norm,
                                     opt.lx_limit));
  const int n = g.size();
  const int jm = g.first_node_at_or_above(opt.r_match);
  if (jm > n - 8) throw ParameterError("matching radius leaves too few nodes before r_max");

  const cplx I(0.0, 1.0);
  Vec hh1(n), hh3(n);
  for (int j = 0; j < n; ++j) {
    hh1[j] = h1(g.r(j));
    hh3[j] = h3(g.r(j));
  }

  // L^-1 f = -h1 int_r^inf f / h1 dr, integrated in s on the tail.
  auto L_inverse = [&](const CVec& f) {
    CVec q(n, cplx(0.0));
    for (int j = jm; j < n; ++j) q[j] = f[j] * g.r(j) / hh1[j];
    CVec I_q = cumulative_from_right(g, q, jm);
    for (int j = jm; j < n; ++j) I_q[j] *= -hh1[j];
    return I_q;
  };

  const CVec Lpsi = L_inverse(psi);
  CVec Psi(n, cplx(0.0)), psi2(n), N(n, cplx(0.0));
  Vec A2(n, 0.0);
  double prev = -1.0;
  int slow = 0;
  bool converged = false;
  for (int it = 0; it < opt.picard_max_iter; ++it) {
    for (int j = jm; j < n; ++j) {
      psi2[j] = I * (hh1[j] + Lpsi[j]) + Psi[j];
      const double q = std::norm(psi2[j]);
      if (!(q < 1.0)) throw NumericalError("Picard iterate left the unit ball; psi is outside the smallness regime");
      A2[j] = std::sqrt(1.0 - q);
      const double a2m1 = -q / (1.0 + A2[j]);
      const double h3mA2 = -one_minus_h3(g.r(j)) - a2m1;
      N[j] = I * a2m1 * psi[j] + h3mA2 * psi2[j] / g.r(j);
    }
    const CVec next = L_inverse(N);
    double diff = 0.0;
    for (int j = jm; j < n; ++j) diff = std::max(diff, std::abs(next[j] - Psi[j]));
    Psi = next;
    if (diff <= opt.picard_tol) {
      converged = true;
      break;
    }
    if (prev > 0.0 && diff > 0.95 * prev) {
      if (++slow >= 3) throw NumericalError("Picard iteration is not contracting; psi is outside the smallness regime");
    } else {
      slow = 0;
    }
    prev = diff;
  }
  if (!converged) throw NumericalError("Picard iteration did not reach its tolerance");
  for (int j = jm; j < n; ++j) {
    psi2[j] = I * (hh1[j] + Lpsi[j]) + Psi[j];
    A2[j] = std::sqrt(1.0 - std::norm(psi2[j]));
  }

  // Inward RK4 in s: d psi2/ds = i r A2 psi - A2 psi2, d A2/ds = r Im(psi conj psi2) + |psi2|^2.
  auto rhs = [](double r, cplx ps, cplx p2, double a2, cplx& dp2, double& da2) {
    dp2 = cplx(0.0, 1.0) * r * a2 * ps - a2 * p2;
    da2 = r * std::imag(ps * std::conj(p2)) + std::norm(p2);
  };
  const double h = -g.ds();
  for (int j = jm - 1; j >= 0; --j) {
    const double r1 = g.r(j + 1), r0 = g.r(j), rm = std::exp(g.s(j) + 0.5 * g.ds());
    const cplx ps1 = psi[j + 1], ps0 = psi[j], psm = midpoint_value(psi, j);
    const cplx y = psi2[j + 1];
    const double a = A2[j + 1];
    cplx k1, k2, k3, k4;
    double l1, l2, l3, l4;
    rhs(r1, ps1, y, a, k1, l1);
    rhs(rm, psm, y + 0.5 * h * k1, a + 0.5 * h * l1, k2, l2);
    rhs(rm, psm, y + 0.5 * h * k2, a + 0.5 * h * l2, k3, l3);
    rhs(r0, ps0, y + h * k3, a + h * l3, k4, l4);
    cplx yn = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    double an = a + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    const double nrm = std::sqrt(std::norm(yn) + an * an);
    if (std::fabs(nrm - 1.0) > 1e-6)
      throw NumericalError(fmt::format("sphere constraint lost at r = {:.4g} (|.| = {:.8f})", r0, nrm));
    psi2[j] = yn / nrm;
    A2[j] = an / nrm;
  }
  return {std::move(psi2), std::move(A2)};
}

GaugeFields fields_from_psi(const RadialGrid& g, const CVec& psi, const ReconstructOptions& opt) {
  ReconstructedFields rf = reconstruct_fields(g, psi, opt);
  GaugeFields f;
  const int n = g.size();
  f.psi = psi;
  f.psi2 = std::move(rf.psi2);
  f.A2 = std::move(rf.A2);
  f.psi1.resize(n);
  for (int j = 0; j < n; ++j) f.psi1[j] = psi[j] + cplx(0.0, 1.0) * f.psi2[j] / g.r(j);
  f.A0 = compute_A0(g, f.psi, f.psi2);
  return f;
}

ReconstructedMap reconstruct_map(const RadialGrid& g, const GaugeFields& fields) {
  const int n = g.size();
  require(fields.size() == n && static_cast<int>(fields.psi2.size()) == n && static_cast<int>(fields.A2.size()) == n,
          "field length does not match grid");
  std::vector<Vec3> row(n);
  for (int j = 0; j < n; ++j) {
    row[j] = Vec3(-fields.psi2[j].imag(), fields.psi2[j].real(), fields.A2[j]);
    if (std::fabs(row[j].squaredNorm() - 1.0) > 1e-6)
      throw ParameterError(fmt::format("fields violate the sphere constraint at r = {:.4g}", g.r(j)));
  }
  // r psi1 = r psi + i psi2 is smooth down to r = 0.
  CVec rpsi1(n);
  for (int j = 0; j < n; ++j) rpsi1[j] = g.r(j) * fields.psi[j] + cplx(0.0, 1.0) * fields.psi2[j];

  auto generator = [&](int j, double t) {
    const cplx q = lagrange_value(rpsi1, j, t);
    Mat3 B;
    B << 0.0, 0.0, q.real(), 0.0, 0.0, q.imag(), -q.real(), -q.imag(), 0.0;
    return B;
  };

  ReconstructedMap out;
  out.frame.O.resize(n);
  out.frame.O[n - 1] = minimal_rotation(row[n - 1].normalized()).transpose();
  const double h = -g.ds();
  double worst = 0.0;
  for (int j = n - 2; j >= 0; --j) {
    const Mat3 B1 = generator(j, 1.0 - kGauss1);
    const Mat3 B2 = generator(j, 1.0 - kGauss2);
    const Mat3 Om = 0.5 * h * (B1 + B2) + kMagnus * h * h * (B1 * B2 - B2 * B1);
    out.frame.O[j] = reorthonormalize(out.frame.O[j + 1] * expm_skew(Om));
    worst = std::max(worst, (out.frame.O[j].row(2).transpose() - row[j]).cwiseAbs().maxCoeff());
  }
  if (worst > 1e-5)
    throw NumericalError(fmt::format("reconstructed frame does not reproduce (psi2, A2): residual {:.3g}", worst));

  out.u.u1.resize(n);
  out.u.u2.resize(n);
  out.u.u3.resize(n);
  for (int j = 0; j < n; ++j) {
    const Vec3 c = out.frame.O[j].col(2);
    out.u.u1[j] = c(0);
    out.u.u2[j] = c(1);
    out.u.u3[j] = c(2);
  }
  return out;
}

ModulationParams modulation_params(const RadialGrid& g, const GaugeFields& fields, double r_star) {
  const double a2 = interpolate(g, fields.A2, r_star);
  const cplx p2 = interpolate(g, fields.psi2, r_star);
  ModulationParams mp;
  mp.variant = ModulationVariant::kAnalytic;
  mp.lambda = solve_scale(a2, r_star);
  mp.alpha = std::arg(cplx(0.0, -1.0) * p2);
  return mp;
}

ModulationParams modulation_params_geometric(const RadialGrid& g, const SphereProfile& u, double r_star) {
  const double u1 = interpolate(g, u.u1, r_star);
  const double u2 = interpolate(g, u.u2, r_star);
  const double u3 = interpolate(g, u.u3, r_star);
  ModulationParams mp;
  mp.variant = ModulationVariant::kGeometric;
  mp.lambda = solve_scale(u3 / std::sqrt(u1 * u1 + u2 * u2 + u3 * u3), r_star);
  mp.alpha = std::atan2(u2, u1);
  return mp;
}

}  // namespace smlab
