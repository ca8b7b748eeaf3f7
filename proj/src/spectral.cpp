#include "smlab/spectral.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>
#include <tbb/parallel_for.h>

#include "smlab/error.hpp"
#include "smlab/profiles.hpp"

namespace smlab {

namespace {

namespace odeint = boost::numeric::odeint;
using State = std::array<double, 2>;

constexpr char kMagic[8] = {'S', 'M', 'L', 'A', 'B', 'T', 'A', 'B'};
constexpr std::uint32_t kVersion = 1;

// Nodes at or below this radius (and below xi r = 1) come from the power series.
constexpr double kSeriesRadius = 0.01;

Vec standard_nodes(const TableParams& p) {
  require(p.k_min < p.k_max, "table needs k_min < k_max");
  require(p.per_octave >= 4, "table needs at least 4 nodes per octave");
  const int count = (p.k_max - p.k_min + 2) * p.per_octave + 1;
  Vec xi(count);
  for (int i = 0; i < count; ++i) xi[i] = std::exp2(p.k_min - 1 + double(i) / p.per_octave);
  return xi;
}

Vec log_trapezoid_weights(const Vec& xi) {
  const int m = static_cast<int>(xi.size());
  Vec w(m, 0.0);
  for (int i = 0; i + 1 < m; ++i) {
    const double h = std::log(xi[i + 1] / xi[i]);
    w[i] += 0.5 * h * xi[i];
    w[i + 1] += 0.5 * h * xi[i + 1];
  }
  return w;
}

std::string compute_hash(const RadialGrid& g, const TableParams& p, const Vec& xi) {
  std::string key = fmt::format("eigentable-v{}|{}|{}|{}|{}|{:.17g}|{:.17g}|{:.17g}|{:.17g}|{:.17g}", kVersion, g.hash(),
                                p.k_min, p.k_max, p.per_octave, p.kappa1, p.kappa2, p.r_match_min, p.r_match_cycles,
                                p.rtol);
  for (double x : xi) key += fmt::format("|{:.17g}", x);
  return stable_hash(key);
}

// C-infinity descent from 1 (t <= 0) to 0 (t >= 1).
double smooth_down(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return b / (a + b);
}

// Smooth step from 0 (t <= -1/4) to 1 (t >= 1/4).
double smooth_step(double t) {
  if (t <= -0.25) return 0.0;
  if (t >= 0.25) return 1.0;
  const double a = std::exp(-1.0 / (t + 0.25)), b = std::exp(-1.0 / (0.25 - t));
  return a / (a + b);
}

struct RowResult {
  Vec phi, psi;
  double q = 0, a = 0, b = 0;
};

// Coefficients of phi = sum_k c_k r^{2k+1} (c_0 = 1).
std::vector<double> series_coefficients(double xi, int count) {
  std::vector<double> c(count, 0.0);
  c[0] = 1.0;
  for (int k = 1; k < count; ++k) {
    double s = -xi * xi * c[k - 1];
    for (int m = 1; m <= k; ++m) s -= 8.0 * m * ((m % 2) ? 1.0 : -1.0) * c[k - m];
    c[k] = s / (4.0 * k * (k + 1));
  }
  return c;
}

RowResult solve_row(const RadialGrid& g, const TableParams& p, double xi) {
  const int n = g.size();
  if (xi * g.r_max() < 2.0)
    throw RangeError(fmt::format("xi = {:.4g} does not reach the oscillatory regime before r_max", xi));

  // Transform support and storage length.
  int ext = g.first_node_at_or_above(p.kappa2 / xi);
  const double R = std::min(g.r_max(), std::max(p.r_match_min, p.r_match_cycles / xi));
  int jR = g.first_node_at_or_above(R);
  if (jR >= n) jR = n - 1;
  if (g.r(jR) > R && jR > 0) --jR;
  if (xi * g.r_min() > 1.0) throw RangeError(fmt::format("xi = {:.4g} oscillates below r_min", xi));
  const int j0 = g.first_node_at_or_above(std::min(kSeriesRadius, 1.0 / xi));
  if (ext < j0 + 16) throw RangeError(fmt::format("xi = {:.4g} is too high for the grid resolution", xi));
  const int stored = std::max(ext, jR + 1);

  RowResult out;
  out.phi.assign(stored, 0.0);
  out.psi.assign(stored, 0.0);

  // Power series on r <= r_{j0}.
  const std::vector<double> c = series_coefficients(xi, 40);
  auto series = [&](double r, double& phi, double& phis, double& psi) {
    const double r2 = r * r, t = 2.0 * r2 / (1.0 + r2);
    double pw = 1.0, sphi = 0.0, sphis = 0.0, spsi = 0.0;
    for (int k = 0; k < static_cast<int>(c.size()); ++k) {
      const double term = c[k] * pw;
      sphi += term;
      sphis += (2 * k + 1) * term;
      spsi += (2 * k + t) * term;
      if (k > 2 && std::fabs(term) < 1e-18 * std::fabs(sphi)) break;
      pw *= r2;
    }
    phi = sphi * r;
    phis = sphis * r;
    psi = spsi / xi;
  };
  Vec phis(stored, 0.0);
  for (int j = 0; j <= j0 && j < stored; ++j) series(g.r(j), out.phi[j], phis[j], out.psi[j]);

  // ODE in s on [s_{j0}, s_{jR}]: phi_ss = (1 - 8 r^2/(1+r^2)^2 - xi^2 r^2) phi.
  const double xi2 = xi * xi;
  auto sys = [xi2](const State& y, State& dy, double s) {
    const double r = std::exp(s), r2 = r * r, q = 1.0 + r2;
    dy[0] = y[1];
    dy[1] = (1.0 - 8.0 * r2 / (q * q) - xi2 * r2) * y[0];
  };
  std::vector<double> times;
  for (int j = j0; j <= jR; ++j) times.push_back(g.s(j));
  State y{out.phi[j0], phis[j0]};
  auto stepper = odeint::make_controlled(1e-30, p.rtol, odeint::runge_kutta_fehlberg78<State>());
  int jj = j0;
  Vec ode_phi(n, 0.0), ode_phis(n, 0.0);
  odeint::integrate_times(stepper, sys, y, times.begin(), times.end(), 0.1 * g.ds(), [&](const State& st, double) {
    ode_phi[jj] = st[0];
    ode_phis[jj] = st[1];
    ++jj;
  });

  // Wronskian match to a J1 + b Y1 at radius r.
  auto match = [&](int j, double& a, double& b) {
    const double r = g.r(j), x = xi * r;
    const double J = boost::math::cyl_bessel_j(1, x), Y = boost::math::cyl_neumann(1, x);
    const double Jp = xi * (boost::math::cyl_bessel_j(0, x) - J / x);
    const double Yp = xi * (boost::math::cyl_neumann(0, x) - Y / x);
    const double f = ode_phi[j], fp = ode_phis[j] / r;
    a = 0.5 * M_PI * r * (f * Yp - fp * Y);
    b = 0.5 * M_PI * r * (J * fp - Jp * f);
  };
  double a = 0, b = 0, a2 = 0, b2 = 0;
  match(jR, a, b);
  int j2 = g.first_node_at_or_above(0.7 * g.r(jR));
  match(j2, a2, b2);
  const double amp = std::hypot(a, b);
  if (!(amp > 0.0) || !std::isfinite(amp)) throw NumericalError(fmt::format("xi = {:.4g}: degenerate far field", xi));
  if (std::hypot(a - a2, b - b2) > 1e-2 * amp)
    throw NumericalError(fmt::format("xi = {:.4g}: far-field fit residual {:.3g} exceeds 1%", xi,
                                     std::hypot(a - a2, b - b2) / amp));
  const double scale = std::sqrt(xi) / amp;
  out.a = a * scale;
  out.b = b * scale;
  out.q = 0.5 * scale;

  for (int j = 0; j < stored; ++j) {
    const double r = g.r(j);
    if (j <= j0) {
      out.phi[j] *= scale;
      out.psi[j] *= scale;
      continue;
    }
    double f, fs;
    if (j <= jR) {
      f = scale * ode_phi[j];
      fs = scale * ode_phis[j];
    } else {
      const double x = xi * r;
      const double J1 = boost::math::cyl_bessel_j(1, x), Y1 = boost::math::cyl_neumann(1, x);
      const double J0 = boost::math::cyl_bessel_j(0, x), Y0 = boost::math::cyl_neumann(0, x);
      f = out.a * J1 + out.b * Y1;
      fs = x * (out.a * J0 + out.b * Y0) - f;
    }
    out.phi[j] = f;
    out.psi[j] = (fs + h3(r) * f) / (xi * r);
  }
  return out;
}

template <class T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_vec(std::ofstream& os, const Vec& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

template <class T>
T read_pod(std::ifstream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError(fmt::format("truncated eigen table file {}", path));
  return v;
}

Vec read_vec(std::ifstream& is, std::size_t count, const std::string& path) {
  Vec v(count);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw IoError(fmt::format("truncated eigen table file {}", path));
  return v;
}

}  // namespace

std::string EigenTable::table_hash(const RadialGrid& g, const TableParams& p) {
  return compute_hash(g, p, standard_nodes(p));
}

std::string EigenTable::cache_path(const std::string& dir, const RadialGrid& g, const TableParams& p) {
  return fmt::format("{}/eigentable_{}.bin", dir, table_hash(g, p));
}

EigenTable EigenTable::build(const RadialGrid& g, const TableParams& p) { return build_on(g, standard_nodes(p), p); }

EigenTable EigenTable::build_on(const RadialGrid& g, const Vec& xi, const TableParams& p) {
  require(g.size() >= 64, "eigen table needs a grid of at least 64 nodes");
  require(!xi.empty(), "eigen table needs at least one frequency");
  for (size_t i = 0; i < xi.size(); ++i) {
    require(xi[i] > 0.0, "frequencies must be positive");
    if (i) require(xi[i] > xi[i - 1], "frequencies must be strictly increasing");
  }
  require(p.kappa1 > 0.0 && p.kappa2 > p.kappa1, "taper needs 0 < kappa1 < kappa2");
  require(p.rtol > 0.0 && p.rtol < 1e-6, "ODE tolerance must lie in (0, 1e-6)");

  EigenTable t;
  t.grid_ = g;
  t.params_ = p;
  t.xi_ = xi;
  t.wxi_ = xi.size() > 1 ? log_trapezoid_weights(xi) : Vec{xi[0]};
  const int m = static_cast<int>(xi.size());
  std::vector<RowResult> rows(m);
  tbb::parallel_for(0, m, [&](int i) { rows[i] = solve_row(g, p, xi[i]); });
  t.q_.resize(m);
  t.a_.resize(m);
  t.b_.resize(m);
  t.phi_.resize(m);
  t.psi_.resize(m);
  for (int i = 0; i < m; ++i) {
    t.q_[i] = rows[i].q;
    t.a_[i] = rows[i].a;
    t.b_[i] = rows[i].b;
    t.phi_[i] = std::move(rows[i].phi);
    t.psi_[i] = std::move(rows[i].psi);
  }
  t.hash_ = compute_hash(g, p, xi);
  t.finalize();
  return t;
}

void EigenTable::finalize() {
  const int m = size();
  const double s_a = std::log(grid_.r_max() / 10.0), s_b = std::log(grid_.r_max());
  ext_.resize(m);
  int cols = 0;
  for (int i = 0; i < m; ++i) {
    ext_[i] = std::min(stored(i), grid_.first_node_at_or_above(params_.kappa2 / xi_[i]));
    cols = std::max(cols, ext_[i]);
  }
  tphi_ = RowMatrix::Zero(m, cols);
  tpsi_ = RowMatrix::Zero(m, cols);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < ext_[i]; ++j) {
      const double window = smooth_down((grid_.s(j) - s_a) / (s_b - s_a));
      const double taper = smooth_down((xi_[i] * grid_.r(j) - params_.kappa1) / (params_.kappa2 - params_.kappa1));
      tphi_(i, j) = phi_[i][j] * taper * window;
      tpsi_(i, j) = psi_[i][j] * taper * window;
    }
  }
}

Vec EigenTable::phi_full(int i) const {
  Vec v(grid_.size(), 0.0);
  std::copy(phi_[i].begin(), phi_[i].end(), v.begin());
  return v;
}

Vec EigenTable::psi_full(int i) const {
  Vec v(grid_.size(), 0.0);
  std::copy(psi_[i].begin(), psi_[i].end(), v.begin());
  return v;
}

CVec EigenTable::forward(const CVec& f, Frame fr) const {
  const int n = grid_.size(), m = size();
  require(static_cast<int>(f.size()) == n, "field length does not match the table grid");
  const RowMatrix& rows = fr == Frame::kH ? tphi_ : tpsi_;
  const int cols = static_cast<int>(rows.cols());
  const Vec& w = grid_.weights();
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::ColMajor> g(cols, 2);
  for (int j = 0; j < cols; ++j) {
    g(j, 0) = w[j] * f[j].real();
    g(j, 1) = w[j] * f[j].imag();
  }
  CVec out(m);
  for (int i = 0; i < m; ++i) {
    const auto row = rows.row(i).head(ext_[i]);
    out[i] = cplx(row.dot(g.col(0).head(ext_[i])), row.dot(g.col(1).head(ext_[i])));
  }
  return out;
}

CVec EigenTable::inverse(const CVec& c, Frame fr) const {
  const int n = grid_.size(), m = size();
  require(static_cast<int>(c.size()) == m, "coefficient length does not match the table");
  const RowMatrix& rows = fr == Frame::kH ? tphi_ : tpsi_;
  Eigen::VectorXd re = Eigen::VectorXd::Zero(rows.cols()), im = Eigen::VectorXd::Zero(rows.cols());
  for (int i = 0; i < m; ++i) {
    const auto row = rows.row(i).head(ext_[i]).transpose();
    re.head(ext_[i]) += (wxi_[i] * c[i].real()) * row;
    im.head(ext_[i]) += (wxi_[i] * c[i].imag()) * row;
  }
  CVec out(n, cplx(0.0));
  for (int j = 0; j < static_cast<int>(rows.cols()); ++j) out[j] = cplx(re[j], im[j]);
  return out;
}

Vec EigenTable::forward(const Vec& f, Frame fr) const {
  const CVec c = forward(CVec(f.begin(), f.end()), fr);
  Vec out(c.size());
  for (size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

Vec EigenTable::inverse(const Vec& c, Frame fr) const {
  const CVec f = inverse(CVec(c.begin(), c.end()), fr);
  Vec out(f.size());
  for (size_t j = 0; j < f.size(); ++j) out[j] = f[j].real();
  return out;
}

double EigenTable::coeff_norm(const CVec& c) const {
  require(static_cast<int>(c.size()) == size(), "coefficient length does not match the table");
  double s = 0.0;
  for (int i = 0; i < size(); ++i) s += wxi_[i] * std::norm(c[i]);
  return std::sqrt(s);
}

double EigenTable::coeff_norm(const Vec& c) const { return coeff_norm(CVec(c.begin(), c.end())); }

void EigenTable::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open {} for writing", path));
  os.write(kMagic, sizeof kMagic);
  write_pod(os, kVersion);
  write_pod(os, grid_.r_min());
  write_pod(os, grid_.r_max());
  write_pod(os, std::int32_t(grid_.size()));
  write_pod(os, std::int32_t(params_.k_min));
  write_pod(os, std::int32_t(params_.k_max));
  write_pod(os, std::int32_t(params_.per_octave));
  write_pod(os, params_.kappa1);
  write_pod(os, params_.kappa2);
  write_pod(os, params_.r_match_min);
  write_pod(os, params_.r_match_cycles);
  write_pod(os, params_.rtol);
  os.write(hash_.data(), 16);
  write_pod(os, std::int32_t(size()));
  write_vec(os, xi_);
  write_vec(os, wxi_);
  write_vec(os, q_);
  write_vec(os, a_);
  write_vec(os, b_);
  for (int i = 0; i < size(); ++i) {
    write_pod(os, std::int32_t(stored(i)));
    write_vec(os, phi_[i]);
    write_vec(os, psi_[i]);
  }
  if (!os) throw IoError(fmt::format("failed writing {}", path));
}

EigenTable EigenTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(fmt::format("eigen table {} not found; build it with `smlab-cli table build`", path));
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + 8, kMagic)) throw IoError(fmt::format("{} is not an eigen table file", path));
  if (read_pod<std::uint32_t>(is, path) != kVersion)
    throw IoError(fmt::format("{} has an unsupported table version", path));
  const double r_min = read_pod<double>(is, path), r_max = read_pod<double>(is, path);
  const int n = read_pod<std::int32_t>(is, path);
  EigenTable t;
  t.grid_ = RadialGrid::log_uniform(r_min, r_max, n);
  t.params_.k_min = read_pod<std::int32_t>(is, path);
  t.params_.k_max = read_pod<std::int32_t>(is, path);
  t.params_.per_octave = read_pod<std::int32_t>(is, path);
  t.params_.kappa1 = read_pod<double>(is, path);
  t.params_.kappa2 = read_pod<double>(is, path);
  t.params_.r_match_min = read_pod<double>(is, path);
  t.params_.r_match_cycles = read_pod<double>(is, path);
  t.params_.rtol = read_pod<double>(is, path);
  std::string hash(16, '\0');
  is.read(hash.data(), 16);
  const int m = read_pod<std::int32_t>(is, path);
  if (m <= 0 || m > 1000000) throw IoError(fmt::format("{} has a corrupt header", path));
  t.xi_ = read_vec(is, m, path);
  t.wxi_ = read_vec(is, m, path);
  t.q_ = read_vec(is, m, path);
  t.a_ = read_vec(is, m, path);
  t.b_ = read_vec(is, m, path);
  t.phi_.resize(m);
  t.psi_.resize(m);
  for (int i = 0; i < m; ++i) {
    const int len = read_pod<std::int32_t>(is, path);
    if (len < 0 || len > n) throw IoError(fmt::format("{} has a corrupt row header", path));
    t.phi_[i] = read_vec(is, len, path);
    t.psi_[i] = read_vec(is, len, path);
  }
  t.hash_ = compute_hash(t.grid_, t.params_, t.xi_);
  if (t.hash_ != hash) throw IoError(fmt::format("{} failed its integrity check", path));
  t.finalize();
  return t;
}

double lp_bump(double xi, int k, int k_min, int k_max) {
  const double x = std::log2(xi);
  const double lo = k == k_min ? 1.0 : smooth_step(x - k + 0.5);
  const double hi = k == k_max ? 0.0 : smooth_step(x - k - 0.5);
  return lo - hi;
}

CVec lp_project(const EigenTable& t, const CVec& f, int k, Frame fr) {
  const TableParams& p = t.params();
  if (k < p.k_min || k > p.k_max) throw RangeError(fmt::format("band {} is outside the table", k));
  CVec c = t.forward(f, fr);
  for (int i = 0; i < t.size(); ++i) c[i] *= lp_bump(t.xi()[i], k, p.k_min, p.k_max);
  return t.inverse(c, fr);
}

Vec band_norms(const EigenTable& t, const CVec& coeffs) {
  const TableParams& p = t.params();
  Vec out(p.k_max - p.k_min + 1, 0.0);
  for (int i = 0; i < t.size(); ++i) {
    const double a = t.xi_weights()[i] * std::norm(coeffs[i]);
    for (int k = p.k_min; k <= p.k_max; ++k) {
      const double chi = lp_bump(t.xi()[i], k, p.k_min, p.k_max);
      if (chi != 0.0) out[k - p.k_min] += chi * chi * a;
    }
  }
  for (double& v : out) v = std::sqrt(v);
  return out;
}

double norm_X_coeffs(const EigenTable& t, const CVec& coeffs_H) {
  const Vec b = band_norms(t, coeffs_H);
  const int k_min = t.params().k_min;
  double high = 0.0, low = 0.0;
  for (int idx = 0; idx < static_cast<int>(b.size()); ++idx) {
    const int k = k_min + idx;
    if (k >= 0)
      high += std::ldexp(1.0, 2 * k) * b[idx] * b[idx];
    else
      low += b[idx] / std::abs(k);
  }
  return std::sqrt(high) + low;
}

double norm_X(const EigenTable& t, const CVec& u) { return norm_X_coeffs(t, t.forward(u, Frame::kH)); }

double norm_LX_coeffs(const EigenTable& t, const CVec& coeffs_Ht) {
  CVec c(coeffs_Ht);
  for (int i = 0; i < t.size(); ++i) c[i] /= t.xi()[i];
  return norm_X_coeffs(t, c);
}

double norm_LX(const EigenTable& t, const CVec& f) { return norm_LX_coeffs(t, t.forward(f, Frame::kHt)); }

double truncated_mass_fraction(const EigenTable& t, const CVec& f, Frame fr) {
  const double phys = l2_norm(t.grid(), f);
  if (phys == 0.0) return 0.0;
  const double spec = t.coeff_norm(t.forward(f, fr));
  return std::max(0.0, 1.0 - (spec * spec) / (phys * phys));
}

double transference_F(const EigenTable& t, int i, int l) {
  require(i >= 0 && i < t.size() && l >= 0 && l < t.size(), "frequency index outside the table");
  const RadialGrid& g = t.grid();
  const int len = std::min(t.stored(i), t.stored(l));
  const Vec& a = t.psi_row(i);
  const Vec& b = t.psi_row(l);
  double s = 0.0;
  for (int j = 0; j < len; ++j) {
    const double q = 1.0 + g.r(j) * g.r(j);
    s += g.weights()[j] * a[j] * b[j] / (q * q);
  }
  return s;
}

Vec lp_kernel_row(const EigenTable& t, int k, int j, Frame fr) {
  const TableParams& p = t.params();
  if (k < p.k_min || k > p.k_max) throw RangeError(fmt::format("band {} is outside the table", k));
  require(j >= 0 && j < t.grid().size(), "node index outside the grid");
  Vec row(t.grid().size(), 0.0);
  for (int i = 0; i < t.size(); ++i) {
    const double chi = lp_bump(t.xi()[i], k, p.k_min, p.k_max);
    if (chi == 0.0 || j >= t.extent(i)) continue;
    const Vec e = fr == Frame::kH ? t.phi_full(i) : t.psi_full(i);
    const double c = t.xi_weights()[i] * chi * e[j];
    const int ext = t.extent(i);
    for (int l = 0; l < ext; ++l) row[l] += c * e[l];
  }
  return row;
}

EigenResidual eigen_residual(const EigenTable& t, int i) {
  const RadialGrid& g = t.grid();
  const double xi = t.xi()[i];
  const Vec phi = t.phi_full(i), psi = t.psi_full(i);
  const Vec Hphi = apply_H(g, phi, Parity::kOdd);
  const Vec Lphi = apply_L(g, phi, Parity::kOdd);
  // Fourth-order truncation of an oscillation at s-frequency x = xi r is about
  // (x ds)^4 / 90 relative to xi^2 phi for the second derivative and
  // (x ds)^4 / 30 for the first; keep both near 1e-5.
  const double x_max = std::min(std::pow(9e-4 / (xi * xi), 0.25), 0.1) / g.ds();
  EigenResidual res;
  res.xi = xi;
  res.j_lo = 3;
  res.j_hi = std::min(t.stored(i) - 4, g.first_node_at_or_above(x_max / xi) - 1);
  if (res.j_hi <= res.j_lo) throw RangeError(fmt::format("xi = {:.4g} has no resolved residual window", xi));
  double e2 = 0, p2 = 0, c2 = 0, s2 = 0;
  for (int j = res.j_lo; j <= res.j_hi; ++j) {
    const double w = g.weights()[j];
    const double re = Hphi[j] - xi * xi * phi[j];
    const double rc = Lphi[j] - xi * psi[j];
    e2 += w * re * re;
    p2 += w * phi[j] * phi[j];
    c2 += w * rc * rc;
    s2 += w * psi[j] * psi[j];
  }
  // Express the eigen-residual relative to xi^2 ||phi||, the size of each side.
  res.eigen = std::sqrt(e2 / p2) / std::max(1.0, xi * xi);
  res.conjugation = std::sqrt(c2 / s2);
  return res;
}

}  // namespace smlab
