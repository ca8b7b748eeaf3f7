#include "smlab/experiments.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "smlab/error.hpp"
#include "smlab/profiles.hpp"

namespace smlab {

namespace {

using nlohmann::json;

// C-infinity step from 0 (t <= 0) to 1 (t >= 1).
double smooth_ramp(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

// Uniform double in [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(fmt::format("unknown config key '{}' in {}", it.key(), where));
  }
}

json spec_json(const ExperimentSpec& s) {
  const EvolutionConfig& e = s.evolution;
  const TableParams& p = s.table;
  return json{
      {"kind", to_string(s.kind)},
      {"eps", s.eps},
      {"gamma", s.gamma},
      {"alpha0", s.alpha0},
      {"lambda0", s.lambda0},
      {"grid", {{"r_min", s.grid.r_min}, {"r_max", s.grid.r_max}, {"n", s.grid.n}}},
      {"table",
       {{"k_min", p.k_min},
        {"k_max", p.k_max},
        {"per_octave", p.per_octave},
        {"kappa1", p.kappa1},
        {"kappa2", p.kappa2},
        {"r_match_min", p.r_match_min},
        {"r_match_cycles", p.r_match_cycles},
        {"rtol", p.rtol}}},
      {"evolution",
       {{"dt", e.dt},
        {"t_end", e.t_end},
        {"scheme", e.scheme},
        {"refresh_every", e.refresh_every},
        {"monitor_every", e.monitor_every},
        {"dt_growth", e.dt_growth},
        {"dt_max", e.dt_max},
        {"snapshot_every", e.snapshot_every},
        {"monitor_lx", e.monitor_lx},
        {"r_match", e.reconstruct.r_match}}},
      {"output", s.output},
      {"cache_dir", s.cache_dir},
      {"seed", s.seed},
      {"bumps", s.bumps},
      {"decay_times", s.decay_times},
      {"fit_t_min", s.fit_t_min},
      {"surrogate_time", s.surrogate_time},
  };
}

ExperimentResult start_result(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p) {
  validate(s);
  const RadialGrid g = s.grid.make();
  if (g.hash() != t.grid().hash() || EigenTable::table_hash(g, s.table) != t.hash())
    throw ConfigError("the table was built for a different grid or parameter set than the spec");
  require(p.table_hash() == t.hash(), "propagator was built for a different table");
  ExperimentResult r;
  r.spec = s;
  r.grid_hash = g.hash();
  r.table_hash = t.hash();
  return r;
}

double mass_fraction_outside(const RadialGrid& g, const CVec& f, double lo, double hi) {
  double in = 0.0, all = 0.0;
  for (int j = 0; j < g.size(); ++j) {
    const double m = g.weights()[j] * std::norm(f[j]);
    all += m;
    if (g.r(j) >= lo && g.r(j) <= hi) in += m;
  }
  return all > 0.0 ? (all - in) / all : 0.0;
}

void add_mass_drift(ExperimentResult& r) {
  const auto& rows = r.trajectory.rows;
  if (rows.empty()) return;
  const double m0 = rows.front().mass;
  double rate = 0.0;
  for (const auto& row : rows)
    if (row.t > 0.0 && m0 > 0.0) rate = std::max(rate, std::fabs(row.mass - m0) / m0 / row.t);
  r.metrics["mass_drift_rate"] = rate;
  r.metrics["completed"] = r.trajectory.completed ? 1.0 : 0.0;
  r.metrics["steps"] = r.trajectory.steps;
  r.metrics["t_final"] = rows.back().t;
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kStability:
      return "stability";
    case ExperimentKind::kInstability:
      return "instability";
    case ExperimentKind::kLinearDecay:
      return "linear-decay";
    case ExperimentKind::kTableBuild:
      return "table-build";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "stability") return ExperimentKind::kStability;
  if (s == "instability") return ExperimentKind::kInstability;
  if (s == "linear-decay") return ExperimentKind::kLinearDecay;
  if (s == "table-build") return ExperimentKind::kTableBuild;
  throw ConfigError(fmt::format("unknown experiment kind '{}'", s));
}

ExperimentSpec default_spec(ExperimentKind k) {
  ExperimentSpec s;
  s.kind = k;
  EvolutionConfig& e = s.evolution;
  switch (k) {
    case ExperimentKind::kStability:
      s.gamma = 0.01;
      e.t_end = 100.0;
      e.dt = 0.01;
      e.dt_growth = 0.1;
      e.dt_max = 0.1;
      e.monitor_every = 1.0;
      break;
    case ExperimentKind::kInstability:
      s.eps = 0.05;
      s.gamma = 0.1;
      s.alpha0 = 0.05;
      s.lambda0 = 1.05;
      e.t_end = 1000.0;
      e.dt = 0.01;
      e.dt_growth = 0.1;
      e.dt_max = 1.0;
      e.monitor_every = 5.0;
      break;
    case ExperimentKind::kLinearDecay:
      s.gamma = 1.0;
      e.t_end = 100.0;
      break;
    case ExperimentKind::kTableBuild:
      break;
  }
  return s;
}

void validate(const ExperimentSpec& s) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(s.grid.r_min > 0.0 && s.grid.r_max > s.grid.r_min && s.grid.n >= 64))
    fail("grid needs 0 < r_min < r_max and n >= 64");
  if (!(s.table.k_max > s.table.k_min && s.table.per_octave >= 4 && s.table.kappa2 > s.table.kappa1 &&
        s.table.kappa1 > 0.0 && s.table.rtol > 0.0))
    fail("table parameters need k_min < k_max, per_octave >= 4, 0 < kappa1 < kappa2, rtol > 0");
  const EvolutionConfig& e = s.evolution;
  if (!(e.dt > 0.0 && e.t_end >= 0.0 && e.monitor_every > 0.0 && e.dt_growth >= 0.0 && e.dt_max >= e.dt))
    fail("evolution needs dt > 0, t_end >= 0, monitor_every > 0, dt_growth >= 0, dt_max >= dt");
  if (e.scheme != 1 && e.scheme != 2) fail("scheme must be 1 or 2");
  if (e.refresh_every < 1) fail("refresh_every must be at least 1");
  if (s.gamma < 0.0) fail("gamma must be non-negative");
  switch (s.kind) {
    case ExperimentKind::kStability:
      if (s.gamma > 0.05) fail(fmt::format("stability runs need gamma <= 0.05 (got {})", s.gamma));
      if (s.bumps < 1) fail("bumps must be at least 1");
      break;
    case ExperimentKind::kInstability: {
      if (!(s.eps > 0.0 && s.eps <= 0.2)) fail(fmt::format("eps must lie in (0, 0.2] (got {})", s.eps));
      if (!(s.lambda0 > 0.0)) fail("lambda0 must be positive");
      const double off = std::fabs(s.alpha0) + std::fabs(s.lambda0 - 1.0);
      if (!(off >= 0.5 * s.gamma && off <= 2.0 * s.gamma))
        fail(fmt::format("|alpha0| + |lambda0 - 1| = {} must lie in [gamma/2, 2 gamma] = [{}, {}]", off,
                         0.5 * s.gamma, 2.0 * s.gamma));
      if (s.fit_t_min <= 1.0) fail("fit_t_min must exceed 1");
      break;
    }
    case ExperimentKind::kLinearDecay:
      if (s.decay_times.empty()) fail("decay_times is empty");
      for (double t : s.decay_times)
        if (!(t >= 0.0)) fail("decay_times must be non-negative");
      break;
    case ExperimentKind::kTableBuild:
      break;
  }
}

std::string spec_to_json(const ExperimentSpec& s) { return spec_json(s).dump(2); }

ExperimentSpec spec_from_json(const std::string& text, const ExperimentSpec& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"kind", "eps", "gamma", "alpha0", "lambda0", "grid", "table", "evolution", "output", "cache_dir",
                  "seed", "bumps", "decay_times", "fit_t_min", "surrogate_time"},
                 "spec");
  ExperimentSpec s = base;
  if (j.contains("kind")) {
    std::string k;
    read_key(j, "kind", k);
    s.kind = parse_experiment_kind(k);
  }
  read_key(j, "eps", s.eps);
  read_key(j, "gamma", s.gamma);
  read_key(j, "alpha0", s.alpha0);
  read_key(j, "lambda0", s.lambda0);
  read_key(j, "output", s.output);
  read_key(j, "cache_dir", s.cache_dir);
  read_key(j, "seed", s.seed);
  read_key(j, "bumps", s.bumps);
  read_key(j, "decay_times", s.decay_times);
  read_key(j, "fit_t_min", s.fit_t_min);
  read_key(j, "surrogate_time", s.surrogate_time);
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_object()) throw ConfigError("'grid' must be an object");
    reject_unknown(g, {"r_min", "r_max", "n"}, "grid");
    read_key(g, "r_min", s.grid.r_min);
    read_key(g, "r_max", s.grid.r_max);
    read_key(g, "n", s.grid.n);
  }
  if (j.contains("table")) {
    const json& t = j["table"];
    if (!t.is_object()) throw ConfigError("'table' must be an object");
    reject_unknown(t, {"k_min", "k_max", "per_octave", "kappa1", "kappa2", "r_match_min", "r_match_cycles", "rtol"},
                   "table");
    read_key(t, "k_min", s.table.k_min);
    read_key(t, "k_max", s.table.k_max);
    read_key(t, "per_octave", s.table.per_octave);
    read_key(t, "kappa1", s.table.kappa1);
    read_key(t, "kappa2", s.table.kappa2);
    read_key(t, "r_match_min", s.table.r_match_min);
    read_key(t, "r_match_cycles", s.table.r_match_cycles);
    read_key(t, "rtol", s.table.rtol);
  }
  if (j.contains("evolution")) {
    const json& e = j["evolution"];
    if (!e.is_object()) throw ConfigError("'evolution' must be an object");
    reject_unknown(e,
                   {"dt", "t_end", "scheme", "refresh_every", "monitor_every", "dt_growth", "dt_max", "snapshot_every",
                    "monitor_lx", "r_match"},
                   "evolution");
    EvolutionConfig& c = s.evolution;
    read_key(e, "dt", c.dt);
    read_key(e, "t_end", c.t_end);
    read_key(e, "scheme", c.scheme);
    read_key(e, "refresh_every", c.refresh_every);
    read_key(e, "monitor_every", c.monitor_every);
    read_key(e, "dt_growth", c.dt_growth);
    read_key(e, "dt_max", c.dt_max);
    read_key(e, "snapshot_every", c.snapshot_every);
    read_key(e, "monitor_lx", c.monitor_lx);
    read_key(e, "r_match", c.reconstruct.r_match);
  }
  return s;
}

ExperimentSpec spec_from_json(const std::string& text) {
  ExperimentSpec base;
  try {
    const json j = json::parse(text);
    if (j.is_object() && j.contains("kind") && j["kind"].is_string())
      base = default_spec(parse_experiment_kind(j["kind"].get<std::string>()));
  } catch (const json::exception&) {
    // Reported by the full parse below.
  }
  return spec_from_json(text, base);
}

SphereProfile make_instability_data(double eps, double gamma, double alpha0, double lambda0, const RadialGrid& g) {
  if (!(eps > 0.0 && eps <= 0.2)) throw ParameterError(fmt::format("eps must lie in (0, 0.2] (got {})", eps));
  if (!(lambda0 > 0.0)) throw ParameterError("lambda0 must be positive");
  const double off = std::fabs(alpha0) + std::fabs(lambda0 - 1.0);
  if (!(off >= 0.5 * gamma && off <= 2.0 * gamma))
    throw ParameterError(fmt::format("|alpha0| + |lambda0 - 1| = {} is not within [gamma/2, 2 gamma]", off));
  const double r_in = 0.5 / eps, r_out = 2.0 / eps;
  if (r_in <= g.r_min() || r_out >= g.r_max())
    throw RangeError(fmt::format("transition region [{}, {}] is not inside the grid", r_in, r_out));
  const SphereProfile a = soliton_profile({1, alpha0, lambda0}, g);
  const SphereProfile b = soliton_profile({1, 0.0, 1.0}, g);
  SphereProfile u = a;
  const double s0 = std::log(r_in), s1 = std::log(r_out);
  for (int j = 0; j < g.size(); ++j) {
    const double s = smooth_ramp((std::log(g.r(j)) - s0) / (s1 - s0));
    if (s == 0.0) continue;
    const double c = a.u1[j] * b.u1[j] + a.u2[j] * b.u2[j] + a.u3[j] * b.u3[j];
    const double th = std::acos(std::clamp(c, -1.0, 1.0));
    double p = 1.0 - s, q = s;
    if (th > 1e-12) {
      p = std::sin((1.0 - s) * th) / std::sin(th);
      q = std::sin(s * th) / std::sin(th);
    }
    double x = p * a.u1[j] + q * b.u1[j], y = p * a.u2[j] + q * b.u2[j], z = p * a.u3[j] + q * b.u3[j];
    const double n = std::sqrt(x * x + y * y + z * z);
    u.u1[j] = x / n;
    u.u2[j] = y / n;
    u.u3[j] = z / n;
  }
  return u;
}

CVec tangent_coordinates(const RadialGrid& g, const SphereProfile& u) {
  require(u.size() == g.size(), "profile does not match the grid");
  CVec f(g.size());
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j), q1 = h1(r), q3 = h3(r);
    const double d1 = u.u1[j] - q1, d2 = u.u2[j], d3 = u.u3[j] - q3;
    f[j] = cplx(d1 * q3 - d3 * q1, d2);
  }
  return f;
}

double map_norm_X(const EigenTable& t, const SphereProfile& u) {
  return norm_X(t, tangent_coordinates(t.grid(), u));
}

SphereProfile make_stability_data(const EigenTable& t, double gamma, std::uint64_t seed, int bumps) {
  require(gamma >= 0.0, "gamma must be non-negative");
  require(bumps >= 1, "need at least one bump");
  const RadialGrid& g = t.grid();
  std::mt19937_64 rng(seed);
  CVec f(g.size(), 0.0);
  for (int b = 0; b < bumps; ++b) {
    const double center = 0.3 * std::pow(10.0, uniform01(rng));
    const double width = 0.3 + 0.5 * uniform01(rng);
    const cplx amp = std::polar(0.5 + uniform01(rng), 2.0 * M_PI * uniform01(rng));
    for (int j = 0; j < g.size(); ++j) {
      const double x = std::log(g.r(j) / center) / width;
      f[j] += amp * std::exp(-0.5 * x * x);
    }
  }
  const double nx = norm_X(t, f);
  if (!(nx > 0.0)) throw NumericalError("stability perturbation has zero X-norm");
  SphereProfile u = soliton_profile({1, 0.0, 1.0}, g);
  for (int j = 0; j < g.size(); ++j) {
    const cplx fj = f[j] * (gamma / nx);
    const double a = std::abs(fj);
    if (a == 0.0) continue;
    const double r = g.r(j), q1 = h1(r), q3 = h3(r);
    // exp_Q(f1 v + f2 w) on the sphere.
    const double c = std::cos(a), sa = std::sin(a) / a;
    double x = c * q1 + sa * fj.real() * q3, y = sa * fj.imag(), z = c * q3 - sa * fj.real() * q1;
    const double n = std::sqrt(x * x + y * y + z * z);
    u.u1[j] = x / n;
    u.u2[j] = y / n;
    u.u3[j] = z / n;
  }
  return u;
}

InverseLogFit fit_inverse_log(const std::vector<double>& t, const std::vector<double>& d, double t_min) {
  require(t.size() == d.size(), "fit inputs differ in length");
  require(t_min > 1.0, "fit window must start above t = 1");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_min) continue;
    const double x = 1.0 / std::fabs(std::log(t[k]));
    sx += x;
    sy += d[k];
    sxx += x * x;
    sxy += x * d[k];
    ++n;
  }
  if (n < 2) throw NumericalError("fewer than two samples in the fit window");
  const double det = n * sxx - sx * sx;
  if (!(std::fabs(det) > 0.0)) throw NumericalError("degenerate fit window");
  InverseLogFit fit;
  fit.b = (n * sxy - sx * sy) / det;
  fit.a = (sy - fit.b * sx) / n;
  fit.samples = n;
  double ss = 0.0;
  for (size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_min) continue;
    const double e = d[k] - fit.a - fit.b / std::fabs(std::log(t[k]));
    ss += e * e;
  }
  fit.rms = std::sqrt(ss / n);
  return fit;
}

std::string summary_json(const ExperimentResult& r) {
  json m = json::object();
  for (const auto& [k, v] : r.metrics) m[k] = std::isfinite(v) ? json(v) : json(nullptr);
  json j{{"spec", spec_json(r.spec)},
         {"grid_hash", r.grid_hash},
         {"table_hash", r.table_hash},
         {"completed", r.trajectory.completed},
         {"failure", r.trajectory.failure},
         {"rows", r.trajectory.rows.size()},
         {"metrics", m}};
  return j.dump(2);
}

ExperimentResult run_stability(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p,
                               const RowCallback& on_row) {
  ExperimentResult r = start_result(s, t, p);
  const RadialGrid& g = t.grid();
  const SphereProfile u0 = make_stability_data(t, s.gamma, s.seed, s.bumps);
  const GaugeFields f0 = derive_fields(g, u0, coulomb_frame(g, u0));
  r.metrics["initial_map_x"] = map_norm_X(t, u0);
  r.metrics["initial_lx"] = norm_LX(t, f0.psi);
  double sup_lx = 0.0, sup_map_x = 0.0, alpha_max = 0.0, energy_defect = 0.0;
  double lam_min = std::numeric_limits<double>::infinity(), lam_max = -lam_min;
  EvolutionConfig cfg = s.evolution;
  cfg.monitor_lx = true;
  r.trajectory = run(t, p, f0.psi, cfg, [&](const TrajectoryRow& row, const EvolutionState& st) {
    sup_lx = std::max(sup_lx, row.lx_norm);
    lam_min = std::min(lam_min, row.lambda);
    lam_max = std::max(lam_max, row.lambda);
    alpha_max = std::max(alpha_max, std::fabs(row.alpha));
    const ReconstructedMap rm = reconstruct_map(g, st.fields);
    sup_map_x = std::max(sup_map_x, map_norm_X(t, rm.u));
    // E(u) = 4 pi + pi ||psi||^2 for maps in the class of Q.
    energy_defect = std::max(energy_defect, std::fabs(energy(g, rm.u, 1) - 4.0 * M_PI - M_PI * row.mass));
    if (on_row) on_row(row, st);
  });
  r.metrics["sup_lx"] = sup_lx;
  r.metrics["sup_map_x"] = sup_map_x;
  r.metrics["lambda_min"] = lam_min;
  r.metrics["lambda_max"] = lam_max;
  r.metrics["alpha_max_abs"] = alpha_max;
  r.metrics["energy_identity_defect"] = energy_defect;
  add_mass_drift(r);
  return r;
}

ExperimentResult run_instability(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p,
                                 const RowCallback& on_row) {
  ExperimentResult r = start_result(s, t, p);
  const RadialGrid& g = t.grid();
  const SphereProfile u0 = make_instability_data(s.eps, s.gamma, s.alpha0, s.lambda0, g);
  const SphereProfile qa = soliton_profile({1, s.alpha0, s.lambda0}, g);
  const GaugeFields f0 = derive_fields(g, u0, coulomb_frame(g, u0));
  r.metrics["initial_proximity_hdot1"] = hdot1_distance(g, u0, qa);
  r.metrics["psi0_l2"] = l2_norm(g, f0.psi);
  r.metrics["psi0_lx"] = norm_LX(t, f0.psi);
  r.metrics["psi0_mass_outside_annulus"] = mass_fraction_outside(g, f0.psi, 0.25 / s.eps, 4.0 / s.eps);

  const bool want_surrogate = s.surrogate_time > 0.0 && s.surrogate_time <= s.evolution.t_end;
  CVec psi_at_surrogate;
  std::vector<double> ts, ds;
  r.trajectory = run(t, p, f0.psi, s.evolution, [&](const TrajectoryRow& row, const EvolutionState& st) {
    ts.push_back(row.t);
    ds.push_back(std::abs(row.psi2_at_1 - cplx(0.0, 1.0)));
    if (want_surrogate && std::fabs(row.t - s.surrogate_time) <= 1e-9 * std::max(1.0, row.t)) psi_at_surrogate = st.psi;
    if (on_row) on_row(row, st);
  });
  const auto& rows = r.trajectory.rows;
  const TrajectoryRow& last = rows.back();
  r.metrics["lambda_end"] = last.lambda;
  r.metrics["alpha_end"] = last.alpha;
  r.metrics["lambda_ratio"] = std::fabs(s.lambda0 - 1.0) > 0.0
                                  ? std::fabs(last.lambda - 1.0) / std::fabs(s.lambda0 - 1.0)
                                  : std::numeric_limits<double>::quiet_NaN();
  // Monotonicity of d(t) on the fit window.
  double d_first = std::numeric_limits<double>::quiet_NaN(), max_rise = 0.0, prev = 0.0;
  bool have = false;
  for (size_t k = 0; k < ts.size(); ++k) {
    if (ts[k] < s.fit_t_min) continue;
    if (!have) {
      d_first = ds[k];
      have = true;
    } else {
      max_rise = std::max(max_rise, ds[k] - prev);
    }
    prev = ds[k];
  }
  r.metrics["d_start"] = d_first;
  r.metrics["d_end"] = ds.empty() ? 0.0 : ds.back();
  r.metrics["d_max_rise"] = max_rise;
  r.metrics["d_decreasing"] = have && max_rise <= 0.0 ? 1.0 : 0.0;
  try {
    const InverseLogFit fit = fit_inverse_log(ts, ds, s.fit_t_min);
    r.metrics["fit_a"] = fit.a;
    r.metrics["fit_b"] = fit.b;
    r.metrics["fit_rms"] = fit.rms;
    r.metrics["fit_samples"] = fit.samples;
  } catch (const NumericalError&) {
    r.metrics["fit_samples"] = 0;
  }
  if (!psi_at_surrogate.empty()) {
    const CVec lin = p.apply(f0.psi, s.surrogate_time);
    CVec diff(lin.size());
    for (size_t j = 0; j < lin.size(); ++j) diff[j] = psi_at_surrogate[j] - lin[j];
    r.metrics["surrogate_lx_distance"] = norm_LX(t, diff) / norm_LX(t, lin);
  }
  add_mass_drift(r);
  return r;
}

ExperimentResult run_linear_decay(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p) {
  ExperimentResult r = start_result(s, t, p);
  const RadialGrid& g = t.grid();
  // Bump of width 0.3 in log r at r = 1 (vanishing to all orders at r = 0).
  CVec psi0(g.size());
  for (int j = 0; j < g.size(); ++j) {
    const double x = std::log(g.r(j)) / 0.3;
    psi0[j] = s.gamma * std::exp(-0.5 * x * x);
  }
  auto local = [&](const CVec& f) {
    double m = 0.0;
    for (int j = 0; j < g.size() && g.r(j) <= 2.0; ++j) m += g.weights()[j] * std::norm(f[j]);
    return m;
  };
  const double n0 = l2_norm(g, psi0), l0 = local(psi0);
  std::vector<double> times = s.decay_times;
  std::sort(times.begin(), times.end());
  for (double tt : times) {
    const CVec a = linear_flow(t, psi0, tt), b = p.apply(psi0, tt);
    const std::string key = fmt::format("{:g}", tt);
    r.metrics["local_fraction_t" + key] = local(a) / l0;
    r.metrics["norm_ratio_t" + key] = l2_norm(g, a) / n0;
    r.metrics["propagator_local_fraction_t" + key] = local(b) / l0;
    r.metrics["propagator_norm_ratio_t" + key] = l2_norm(g, b) / n0;
    TrajectoryRow row;
    row.t = tt;
    const double nb = l2_norm(g, b);
    row.mass = nb * nb;
    row.lx_norm = norm_LX(t, b);
    row.local_energy = local(b);
    row.lambda = std::numeric_limits<double>::quiet_NaN();
    row.alpha = std::numeric_limits<double>::quiet_NaN();
    row.psi2_at_1 = std::numeric_limits<double>::quiet_NaN();
    row.a2_at_1 = std::numeric_limits<double>::quiet_NaN();
    r.trajectory.rows.push_back(row);
  }
  return r;
}

ExperimentResult run_experiment(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p,
                                const RowCallback& on_row) {
  switch (s.kind) {
    case ExperimentKind::kStability:
      return run_stability(s, t, p, on_row);
    case ExperimentKind::kInstability:
      return run_instability(s, t, p, on_row);
    case ExperimentKind::kLinearDecay:
      return run_linear_decay(s, t, p);
    case ExperimentKind::kTableBuild:
      break;
  }
  throw ConfigError("table-build is not a run kind");
}

TableBundle load_tables(const ExperimentSpec& s, bool build) {
  validate(s);
  const RadialGrid g = s.grid.make();
  const std::string path = EigenTable::cache_path(s.cache_dir, g, s.table);
  TableBundle b;
  if (std::filesystem::exists(path)) {
    b.table = EigenTable::load(path);
  } else if (build) {
    std::error_code ec;
    std::filesystem::create_directories(s.cache_dir, ec);
    if (ec) throw IoError(fmt::format("cannot create cache directory {}: {}", s.cache_dir, ec.message()));
    b.table = EigenTable::build(g, s.table);
    b.table.save(path);
  } else {
    throw IoError(fmt::format("eigen table not found at {}; build it with `smlab-cli table build`", path));
  }
  b.propagator = LinearPropagator::load_or_build(s.cache_dir, b.table);
  return b;
}

void write_outputs(const ExperimentResult& r) {
  write_trajectory_csv(r.spec.output + ".csv", r.trajectory);
  const std::string path = r.spec.output + ".json";
  std::ofstream os(path);
  if (!os) throw IoError(fmt::format("cannot open {} for writing", path));
  os << summary_json(r) << '\n';
  if (!os) throw IoError(fmt::format("failed writing {}", path));
  if (!r.trajectory.snapshots.empty())
    write_snapshots(r.spec.output + ".snap", r.spec.grid.make(), r.table_hash, r.trajectory.snapshots);
}

void write_map_file(const std::string& path, const RadialGrid& g, const SphereProfile& u) {
  require(u.size() == g.size(), "profile does not match the grid");
  std::ofstream os(path);
  if (!os) throw IoError(fmt::format("cannot open {} for writing", path));
  os << "# smlab-field map\n";
  for (int j = 0; j < g.size(); ++j) os << fmt::format("{:.17g} {:.17g} {:.17g} {:.17g}\n", g.r(j), u.u1[j], u.u2[j], u.u3[j]);
  if (!os) throw IoError(fmt::format("failed writing {}", path));
}

void write_psi_file(const std::string& path, const RadialGrid& g, const CVec& psi) {
  require(static_cast<int>(psi.size()) == g.size(), "field does not match the grid");
  std::ofstream os(path);
  if (!os) throw IoError(fmt::format("cannot open {} for writing", path));
  os << "# smlab-field psi\n";
  for (int j = 0; j < g.size(); ++j) os << fmt::format("{:.17g} {:.17g} {:.17g}\n", g.r(j), psi[j].real(), psi[j].imag());
  if (!os) throw IoError(fmt::format("failed writing {}", path));
}

FieldFile read_field_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(fmt::format("field file {} not found", path));
  std::string header;
  std::getline(is, header);
  FieldFile f;
  int cols = 0;
  if (header == "# smlab-field map") {
    f.kind = FieldFile::Kind::kMap;
    cols = 4;
  } else if (header == "# smlab-field psi") {
    f.kind = FieldFile::Kind::kPsi;
    cols = 3;
  } else {
    throw IoError(fmt::format("{}: missing '# smlab-field map|psi' header", path));
  }
  std::vector<std::array<double, 4>> rows;
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::array<double, 4> v{};
    for (int c = 0; c < cols; ++c)
      if (!(ls >> v[c])) throw IoError(fmt::format("{}:{}: expected {} numbers", path, lineno, cols));
    rows.push_back(v);
  }
  if (rows.size() < 2) throw IoError(fmt::format("{}: too few rows", path));
  const int n = static_cast<int>(rows.size());
  f.grid = RadialGrid::log_uniform(rows.front()[0], rows.back()[0], n);
  for (int j = 0; j < n; ++j)
    if (std::fabs(rows[j][0] / f.grid.r(j) - 1.0) > 1e-9)
      throw IoError(fmt::format("{}: nodes are not log-uniform (row {})", path, j + 2));
  if (f.kind == FieldFile::Kind::kMap) {
    f.u.u1.resize(n);
    f.u.u2.resize(n);
    f.u.u3.resize(n);
    for (int j = 0; j < n; ++j) {
      f.u.u1[j] = rows[j][1];
      f.u.u2[j] = rows[j][2];
      f.u.u3[j] = rows[j][3];
    }
  } else {
    f.psi.resize(n);
    for (int j = 0; j < n; ++j) f.psi[j] = cplx(rows[j][1], rows[j][2]);
  }
  return f;
}

std::map<std::string, double> field_norms(const FieldFile& f, const EigenTable& t) {
  if (f.grid.hash() != t.grid().hash()) throw ConfigError("field file grid differs from the table grid");
  const RadialGrid& g = t.grid();
  std::map<std::string, double> out;
  if (f.kind == FieldFile::Kind::kMap) {
    out["sphere_defect"] = sphere_defect(f.u);
    out["map_x_norm"] = map_norm_X(t, f.u);
    out["hdot1_distance_to_q"] = hdot1_distance(g, f.u, soliton_profile({1, 0.0, 1.0}, g));
    out["energy"] = energy(g, f.u, 1);
    const CVec psi = derive_fields(g, f.u, coulomb_frame(g, f.u)).psi;
    out["psi_l2"] = l2_norm(g, psi);
    out["psi_lx"] = norm_LX(t, psi);
  } else {
    out["psi_l2"] = l2_norm(g, f.psi);
    out["psi_lx"] = norm_LX(t, f.psi);
  }
  return out;
}

}  // namespace smlab
