#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "smlab/error.hpp"
#include "smlab/profiles.hpp"
#include "smlab/spectral.hpp"

using namespace smlab;
using namespace testing_support;

namespace {

const RadialGrid& grid() {
  static const RadialGrid g = RadialGrid::log_uniform(1e-4, 1e4, 4096);
  return g;
}

double build_seconds = 0.0;

const EigenTable& table() {
  static const EigenTable t = [] {
    const auto t0 = std::chrono::steady_clock::now();
    EigenTable tt = EigenTable::build(grid());
    build_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return tt;
  }();
  return t;
}

int node_near(const EigenTable& t, double xi) {
  int best = 0;
  for (int i = 0; i < t.size(); ++i)
    if (std::fabs(std::log(t.xi()[i] / xi)) < std::fabs(std::log(t.xi()[best] / xi))) best = i;
  return best;
}

// Smooth coefficients centred at log2 xi = centre, cut off outside [lo, hi].
CVec smooth_coeffs(const EigenTable& t, double centre, double width, double lo, double hi, cplx phase = 1.0) {
  CVec c(t.size(), cplx(0.0));
  for (int i = 0; i < t.size(); ++i) {
    const double x = std::log2(t.xi()[i]);
    if (x <= lo || x >= hi) continue;
    const double edge = std::exp(-1.0 / ((x - lo) * (hi - x)));
    c[i] = phase * edge * std::exp(-(x - centre) * (x - centre) / (2 * width * width));
  }
  return c;
}

CVec bump_field(const RadialGrid& g, double centre, double width, cplx amp) {
  CVec f(g.size());
  for (int j = 0; j < g.size(); ++j) f[j] = amp * log_bump(g.r(j), centre, width);
  return f;
}

double rel_l2(const RadialGrid& g, const CVec& a, const CVec& b) {
  CVec d(a.size());
  for (size_t j = 0; j < a.size(); ++j) d[j] = a[j] - b[j];
  return l2_norm(g, d) / l2_norm(g, b);
}

}  // namespace

TEST_CASE("eigen table residuals stay below 1e-4 across the table") {
  const EigenTable& t = table();
  CHECK(t.size() == 18 * 64 + 1);
  double eig = 0.0, conj = 0.0;
  for (int i = 0; i < t.size(); ++i) {
    const EigenResidual r = eigen_residual(t, i);
    eig = std::max(eig, r.eigen);
    conj = std::max(conj, r.conjugation);
  }
  CHECK(eig < 1e-4);
  CHECK(conj < 1e-4);
  CHECK(build_seconds < 120.0);
}

TEST_CASE("far-field amplitude is normalised") {
  const EigenTable& t = table();
  for (int i = 0; i < t.size(); ++i) {
    const double a = t.bessel_a()[i], b = t.bessel_b()[i];
    CHECK(a * a + b * b == doctest::Approx(t.xi()[i]).epsilon(1e-12));
  }
}

TEST_CASE("Plancherel and round trip on a bump bank in the H~ frame") {
  const EigenTable& t = table();
  const RadialGrid& g = grid();
  const double centres[10] = {0.15, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0, 1.3, 1.6, 2.0};
  for (int b = 0; b < 10; ++b) {
    const CVec f = bump_field(g, centres[b], 0.3 + 0.04 * b, std::polar(1.0, 0.6 * b));
    const CVec c = t.forward(f, Frame::kHt);
    CHECK(std::fabs(t.coeff_norm(c) / l2_norm(g, f) - 1.0) < 1e-4);
    CHECK(rel_l2(g, t.inverse(c, Frame::kHt), f) < 1e-3);
  }
}

TEST_CASE("band-limited round trip in both frames") {
  const EigenTable& t = table();
  const RadialGrid& g = grid();
  for (Frame fr : {Frame::kH, Frame::kHt}) {
    const CVec c = smooth_coeffs(t, 0.0, 1.5, -6.0, 5.0, cplx(0.6, 0.8));
    const CVec f = t.inverse(c, fr);
    CHECK(std::fabs(l2_norm(g, f) / t.coeff_norm(c) - 1.0) < 1e-4);
    CHECK(rel_l2(g, t.inverse(t.forward(f, fr), fr), f) < 1e-3);
  }
}

TEST_CASE("intertwining F_Ht(L f) = xi F_H f") {
  const EigenTable& t = table();
  const RadialGrid& g = grid();
  const CVec f = bump_field(g, 1.0, 0.3, 1.0);
  const CVec a = t.forward(apply_L(g, f, Parity::kOdd), Frame::kHt);
  const CVec b = t.forward(f, Frame::kH);
  CVec d(a.size());
  for (int i = 0; i < t.size(); ++i) d[i] = a[i] - t.xi()[i] * b[i];
  CHECK(sup_norm(d) < 1e-4 * sup_norm(a));
}

TEST_CASE("q(xi) follows its small and large frequency laws") {
  const EigenTable& t = table();
  // xi^{-1/2} / |log xi| over [1e-3, 1e-2].
  const int a = node_near(t, 1e-3), b = node_near(t, 1e-2);
  auto small_law = [&](int i) { return t.q()[i] * std::sqrt(t.xi()[i]) * std::fabs(std::log(t.xi()[i])); };
  CHECK(small_law(b) / small_law(a) == doctest::Approx(1.0).epsilon(0.2));
  // xi^{3/2} over [10, 100].
  const int c = node_near(t, 10.0), d = node_near(t, 100.0);
  auto large_law = [&](int i) { return t.q()[i] / std::pow(t.xi()[i], 1.5); };
  CHECK(large_law(d) / large_law(c) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("small-xi limit of psi_xi is the psi0 profile") {
  const EigenTable& t = table();
  const RadialGrid& g = grid();
  const int j = g.first_node_at_or_above(1.0);
  for (int i : {0, node_near(t, 1e-3)}) {
    const double ratio = t.psi_row(i)[j] / (t.xi()[i] * t.q()[i]);
    CHECK(ratio == doctest::Approx(-2.0 * psi0(g.r(j))).epsilon(1e-4));
  }
  CHECK(psi0(1.0) == doctest::Approx(0.5 * (2 * std::log(2.0) - 1)).epsilon(1e-14));
}

TEST_CASE("dyadic bumps form a partition of unity with disjoint far supports") {
  const EigenTable& t = table();
  const TableParams& p = t.params();
  for (int i = 0; i < t.size(); ++i) {
    double s = 0.0;
    for (int k = p.k_min; k <= p.k_max; ++k) {
      const double ck = lp_bump(t.xi()[i], k, p.k_min, p.k_max);
      CHECK(ck >= 0.0);
      s += ck;
      for (int k2 = k + 2; k2 <= p.k_max; ++k2) CHECK(ck * lp_bump(t.xi()[i], k2, p.k_min, p.k_max) == 0.0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(lp_bump(std::exp2(3.2), 3, p.k_min, p.k_max) == 1.0);
  CHECK(lp_bump(std::exp2(3.8), 3, p.k_min, p.k_max) == 0.0);
}

TEST_CASE("Littlewood-Paley projections reassemble and separate") {
  const EigenTable& t = table();
  const RadialGrid& g = grid();
  const CVec f = t.inverse(smooth_coeffs(t, -1.0, 2.0, -8.0, 5.0), Frame::kH);
  CVec sum(g.size(), cplx(0.0));
  const TableParams& p = t.params();
  for (int k = p.k_min; k <= p.k_max; ++k) {
    const CVec pk = lp_project(t, f, k, Frame::kH);
    for (int j = 0; j < g.size(); ++j) sum[j] += pk[j];
  }
  CHECK(rel_l2(g, sum, f) < 1e-3);
  const CVec p1 = lp_project(t, f, 1, Frame::kH);
  CHECK(l2_norm(g, lp_project(t, p1, 3, Frame::kH)) < 1e-3 * l2_norm(g, p1));
  CHECK(l2_norm(g, lp_project(t, p1, -1, Frame::kH)) < 1e-3 * l2_norm(g, p1));
  CHECK_THROWS_AS(lp_project(t, f, p.k_max + 1, Frame::kH), RangeError);
}

TEST_CASE("projection kernel decays away from the diagonal") {
  const EigenTable& t = table();
  const RadialGrid& g = grid();
  for (int k : {0, 2, 4}) {
    const int j = g.first_node_at_or_above(1.0);
    const Vec K = lp_kernel_row(t, k, j, Frame::kH);
    const double unit = std::ldexp(1.0, -k);
    double near = 0.0, far = 0.0;
    for (int l = 0; l < g.size(); ++l) {
      const double d = std::fabs(g.r(l) - g.r(j)) / unit;
      if (d < 2.0) near = std::max(near, std::fabs(K[l]));
      if (d >= 20.0) far = std::max(far, std::fabs(K[l]));
    }
    CHECK(far < 0.1 * near);
  }
}

TEST_CASE("X and LX norms") {
  const EigenTable& t = table();
  const RadialGrid& g = grid();
  // Coefficients inside the plateau of chi_2.
  const CVec c = smooth_coeffs(t, 2.0, 0.1, 1.8, 2.2);
  const CVec f = t.inverse(c, Frame::kH);
  CHECK(norm_X(t, f) == doctest::Approx(4.0 * l2_norm(g, f)).epsilon(1e-3));
  // ||L u||_LX = ||u||_X for band-limited u.
  const CVec u = t.inverse(smooth_coeffs(t, -2.0, 2.0, -9.0, 5.0), Frame::kH);
  CHECK(norm_LX(t, apply_L(g, u, Parity::kOdd)) == doctest::Approx(norm_X(t, u)).epsilon(1e-3));
  // Embedding constant of LX into L2 on a bump bank.
  double C = 0.0;
  for (double centre : {0.3, 1.0, 3.0}) {
    const CVec h = bump_field(g, centre, 0.4, 1.0);
    C = std::max(C, l2_norm(g, h) / norm_LX(t, h));
  }
  MESSAGE("measured L2 <= C LX constant: " << C);
  CHECK(C < 2.0);
}

TEST_CASE("resonance concentrates at low frequency") {
  const EigenTable& t = table();
  const RadialGrid& g = grid();
  double prev = 1.0;
  for (double R : {3.0, 10.0, 30.0, 100.0}) {
    CVec f(g.size());
    for (int j = 0; j < g.size(); ++j) {
      const double r = g.r(j);
      f[j] = phi0(r) * std::exp(-std::pow(r / R, 4));
    }
    const Vec bands = band_norms(t, t.forward(f, Frame::kH));
    double high = 0.0, all = 0.0;
    for (size_t k = 0; k < bands.size(); ++k) {
      all += bands[k] * bands[k];
      if (int(k) + t.params().k_min >= 0) high += bands[k] * bands[k];
    }
    const double frac = std::sqrt(high / all);
    CHECK(frac < prev);
    prev = frac;
  }
}

TEST_CASE("transference kernel") {
  const EigenTable& t = table();
  const int one = node_near(t, 1.0);
  for (int i : {0, 100, 500, 900}) CHECK(std::fabs(transference_F(t, i, one) - transference_F(t, one, i)) < 1e-8);
  CHECK(transference_F(t, one, one) > 0.0);
  auto env = [&](int i) {
    const double xi = t.xi()[i], lg = std::log(xi);
    return transference_F(t, i, one) / (std::sqrt(xi) / std::sqrt(1.0 + lg * lg));
  };
  const double lo = env(node_near(t, 1e-3)), hi = env(node_near(t, 1e-2));
  CHECK(hi / lo < 2.0);
  CHECK(hi / lo > 0.5);
}

TEST_CASE("table save and load") {
  const EigenTable& t = table();
  const auto dir = std::filesystem::temp_directory_path() / "smlab_table_test";
  std::filesystem::create_directories(dir);
  const std::string path = EigenTable::cache_path(dir.string(), t.grid(), t.params());
  CHECK(t.hash() == EigenTable::table_hash(t.grid(), t.params()));
  t.save(path);
  const EigenTable u = EigenTable::load(path);
  CHECK(u.hash() == t.hash());
  CHECK(u.size() == t.size());
  for (int i = 0; i < t.size(); i += 97) {
    CHECK(u.phi_row(i) == t.phi_row(i));
    CHECK(u.psi_row(i) == t.psi_row(i));
    CHECK(u.extent(i) == t.extent(i));
  }
  {
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.seekp(200);
    const double junk = 12345.0;
    fs.write(reinterpret_cast<const char*>(&junk), sizeof junk);
  }
  CHECK_THROWS_AS(EigenTable::load(path), IoError);
  std::filesystem::resize_file(path, 100);
  CHECK_THROWS_AS(EigenTable::load(path), IoError);
  CHECK_THROWS_AS(EigenTable::load((dir / "missing.bin").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("build rejects unresolvable frequencies") {
  const RadialGrid g = RadialGrid::log_uniform(1e-3, 1e2, 512);
  CHECK_THROWS_AS(EigenTable::build_on(g, Vec{1e-3}), RangeError);
  CHECK_THROWS_AS(EigenTable::build_on(g, Vec{1e4}), RangeError);
  CHECK_THROWS_AS(EigenTable::build_on(g, Vec{2.0, 1.0}), ParameterError);
  const EigenTable ok = EigenTable::build_on(g, Vec{0.5, 1.0, 2.0});
  for (int i = 0; i < ok.size(); ++i) CHECK(eigen_residual(ok, i).eigen < 1e-4);
}
