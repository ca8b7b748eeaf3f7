// Acceptance suite: runs every primary criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion, followed by the measured values.
//
//   smlab-acceptance [--cache-dir DIR] [--only 1,2,...] [--expect-fail 7,...]
//
// The exit status is 0 when the set of failing criteria equals the
// --expect-fail set, so a criterion that starts passing is reported as well.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "smlab/error.hpp"
#include "smlab/evolve.hpp"
#include "smlab/experiments.hpp"
#include "smlab/gauge.hpp"
#include "smlab/profiles.hpp"
#include "smlab/soliton.hpp"
#include "smlab/spectral.hpp"
#include "helpers.hpp"

using namespace smlab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;
  // Records one sub-check; the criterion passes only if all of them do.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(fmt::format("{} {}", ok ? "ok  " : "FAIL", what));
  }
  void note(const std::string& what) { lines.push_back("     " + what); }
};

struct Context {
  std::string cache_dir;
  RadialGrid grid;
  EigenTable table;
  double table_seconds = 0.0;
  LinearPropagator prop;
  bool have_prop = false;

  const LinearPropagator& propagator() {
    if (!have_prop) {
      prop = LinearPropagator::load_or_build(cache_dir, table);
      have_prop = true;
    }
    return prop;
  }
};

double rel_l2(const RadialGrid& g, const CVec& a, const CVec& b) {
  CVec d(a.size());
  for (size_t j = 0; j < a.size(); ++j) d[j] = a[j] - b[j];
  return l2_norm(g, d) / l2_norm(g, b);
}

double log_bump(double r, double r0, double w) {
  const double x = std::log(r / r0) / w;
  return std::exp(-0.5 * x * x);
}

double max_abs_diff(const Vec& a, const Vec& b) {
  double e = 0.0;
  for (size_t j = 0; j < a.size(); ++j) e = std::max(e, std::fabs(a[j] - b[j]));
  return e;
}

double max_abs_diff(const SphereProfile& a, const SphereProfile& b) {
  return std::max({max_abs_diff(a.u1, b.u1), max_abs_diff(a.u2, b.u2), max_abs_diff(a.u3, b.u3)});
}

double constraint_defect(const GaugeFields& f) {
  double e = 0.0;
  for (size_t j = 0; j < f.A2.size(); ++j) e = std::max(e, std::fabs(std::norm(f.psi2[j]) + f.A2[j] * f.A2[j] - 1.0));
  return e;
}

int node_near(const EigenTable& t, double xi) {
  int best = 0;
  for (int i = 0; i < t.size(); ++i)
    if (std::fabs(std::log(t.xi()[i] / xi)) < std::fabs(std::log(t.xi()[best] / xi))) best = i;
  return best;
}

// 1. Eigen-equation and conjugation residuals over the whole table; build time.
Outcome spectral_calibration(Context& c) {
  Outcome o;
  double eig = 0.0, conj = 0.0, worst_xi = 0.0;
  for (int i = 0; i < c.table.size(); ++i) {
    const EigenResidual r = eigen_residual(c.table, i);
    if (r.eigen > eig) worst_xi = r.xi;
    eig = std::max(eig, r.eigen);
    conj = std::max(conj, r.conjugation);
  }
  o.check(eig < 1e-4, fmt::format("max eigen residual {:.3e} (worst xi {:.3g}) < 1e-4 over {} xi", eig, worst_xi,
                                  c.table.size()));
  o.check(conj < 1e-4, fmt::format("max conjugation residual {:.3e} < 1e-4", conj));
  o.check(c.table_seconds < 120.0, fmt::format("table build {:.1f} s < 120 s", c.table_seconds));
  return o;
}

// 2. Plancherel and inversion on ten log-bumps of different centres, widths and phases.
Outcome plancherel(Context& c) {
  Outcome o;
  const RadialGrid& g = c.grid;
  const auto t0 = Clock::now();
  double plan = 0.0, trip = 0.0;
  const double centres[10] = {0.15, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0, 1.3, 1.6, 2.0};
  for (int b = 0; b < 10; ++b) {
    CVec f(g.size());
    for (int j = 0; j < g.size(); ++j) f[j] = std::polar(1.0, 0.6 * b) * log_bump(g.r(j), centres[b], 0.3 + 0.04 * b);
    const CVec coeffs = c.table.forward(f, Frame::kHt);
    plan = std::max(plan, std::fabs(c.table.coeff_norm(coeffs) / l2_norm(g, f) - 1.0));
    trip = std::max(trip, rel_l2(g, c.table.inverse(coeffs, Frame::kHt), f));
  }
  const double secs = seconds_since(t0);
  o.check(plan < 1e-4, fmt::format("max | ||F f|| / ||f|| - 1 | = {:.3e} < 1e-4", plan));
  o.check(trip < 1e-3, fmt::format("max round-trip error {:.3e} < 1e-3", trip));
  o.check(secs < 10.0, fmt::format("bank transformed in {:.2f} s < 10 s", secs));
  return o;
}

// 3. Soliton energies and vanishing reduced fields.
Outcome soliton_identities(Context& c) {
  Outcome o;
  const RadialGrid& g = c.grid;
  double worst_e = 0.0, worst_psi = 0.0;
  for (int m : {1, 2}) {
    for (auto [alpha, lambda] : {std::pair{0.0, 1.0}, std::pair{0.3, 1.2}}) {
      const SolitonParams p{m, alpha, lambda};
      const SphereProfile u = soliton_profile(p, g);
      const double e = energy(g, u, m);
      const double rel = std::fabs(e / (4.0 * M_PI * m) - 1.0);
      worst_e = std::max(worst_e, rel);
      o.note(fmt::format("m = {} alpha = {} lambda = {}: E / (4 pi m) - 1 = {:.2e}", m, alpha, lambda, e / (4.0 * M_PI * m) - 1.0));
      const GaugeFields f = derive_fields(g, u, coulomb_frame(g, u, FrameOptions{.m = m}), m);
      worst_psi = std::max(worst_psi, sup_norm(f.psi));
    }
  }
  o.check(worst_e < 1e-5, fmt::format("max relative energy error {:.3e} < 1e-5", worst_e));
  o.check(worst_psi <= 1e-8, fmt::format("max sup |psi| of solitons {:.3e} <= 1e-8", worst_psi));
  return o;
}

// 4. u -> psi -> (psi2, A2) -> u for seeded perturbations of size gamma.
Outcome elliptic_round_trip(Context& c) {
  Outcome o;
  const RadialGrid& g = c.grid;
  double worst_u = 0.0, worst_c = 0.0;
  for (double gamma : {0.01, 0.03, 0.05}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const SphereProfile u = make_stability_data(c.table, gamma, seed, 3);
      const GaugeFields f = derive_fields(g, u, coulomb_frame(g, u));
      const GaugeFields back = fields_from_psi(g, f.psi);
      const ReconstructedMap m = reconstruct_map(g, back);
      const double du = max_abs_diff(m.u, u);
      worst_u = std::max(worst_u, du);
      worst_c = std::max({worst_c, constraint_defect(f), constraint_defect(back)});
    }
  }
  o.check(worst_u < 1e-5, fmt::format("max sup |u_rec - u| {:.3e} < 1e-5 (gamma in {{0.01, 0.03, 0.05}}, 3 seeds)", worst_u));
  o.check(worst_c < 1e-8, fmt::format("max |A2^2 + |psi2|^2 - 1| {:.3e} < 1e-8", worst_c));
  return o;
}

// 5. Mass conservation, self-convergence and the soliton fixed point.
Outcome conservation_convergence(Context& c) {
  Outcome o;
  const RadialGrid& g = c.grid;
  const LinearPropagator& p = c.propagator();
  const SphereProfile u = make_stability_data(c.table, 0.05, 5, 3);
  const CVec psi0 = derive_fields(g, u, coulomb_frame(g, u)).psi;
  const double m0 = std::pow(l2_norm(g, psi0), 2);
  {
    EvolutionConfig cfg;
    cfg.dt = 1e-3;
    EvolutionState s = initial_state(g, psi0, cfg);
    double drift = 0.0;
    for (int k = 1; k <= 1000; ++k) {
      step_nonlinear(p, g, s, cfg, cfg.dt);
      if (k % 100 == 0) drift = std::max(drift, std::fabs(std::pow(l2_norm(g, s.psi), 2) - m0) / m0 / (k * cfg.dt));
    }
    o.check(drift < 1e-6, fmt::format("mass drift {:.3e} per unit time < 1e-6 (dt = 1e-3, t in [0, 1])", drift));
  }
  {
    // The order is measured on smooth data: the seeded data above carries
    // enough content at large xi that dt = 0.005 is still pre-asymptotic.
    const SphereProfile us = testing_support::perturbed_q(g, 0.05, 0.025, 3.0, 4.5);
    const CVec psi_s = derive_fields(g, us, coulomb_frame(g, us)).psi;
    std::vector<CVec> sol;
    for (double dt : {0.04, 0.02, 0.01, 0.005}) {
      EvolutionConfig cfg;
      EvolutionState s = initial_state(g, psi_s, cfg);
      const int steps = static_cast<int>(std::lround(1.0 / dt));
      for (int k = 0; k < steps; ++k) step_nonlinear(p, g, s, cfg, dt);
      sol.push_back(s.psi);
    }
    bool ok = true;
    std::string orders;
    for (size_t k = 0; k + 2 < sol.size(); ++k) {
      const double order = std::log2(rel_l2(g, sol[k], sol[k + 1]) / rel_l2(g, sol[k + 1], sol[k + 2]));
      ok = ok && std::fabs(order - 2.0) <= 0.3;
      orders += fmt::format("{}{:.3f}", orders.empty() ? "" : ", ", order);
    }
    o.check(ok, fmt::format("self-convergence orders [{}] within 2.0 +- 0.3 (dt = 0.04 .. 0.005, t = 1)", orders));
  }
  {
    EvolutionConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 10.0;
    cfg.monitor_every = 0.5;
    const Trajectory tr = run(c.table, p, CVec(g.size(), 0.0), cfg);
    double dev = 0.0;
    for (const auto& row : tr.rows)
      dev = std::max({dev, std::fabs(row.lambda - 1.0), std::fabs(row.alpha), std::sqrt(row.mass),
                      std::abs(row.psi2_at_1 - cplx(0.0, 1.0)), std::fabs(row.a2_at_1)});
    o.check(tr.completed && dev <= 1e-8,
            fmt::format("soliton data: max deviation of (lambda, alpha, ||psi||, psi2(1), A2(1)) {:.3e} <= 1e-8 on [0, 10]",
                        dev));
  }
  return o;
}

// 6. Stability run at gamma = 0.01 to t = 100.
Outcome stability(Context& c) {
  Outcome o;
  ExperimentSpec s = default_spec(ExperimentKind::kStability);
  s.cache_dir = c.cache_dir;
  const auto t0 = Clock::now();
  const ExperimentResult r = run_stability(s, c.table, c.propagator());
  const double secs = seconds_since(t0);
  const auto& m = r.metrics;
  const double g = s.gamma;
  o.note(fmt::format("initial X-norm of u - Q {:.4g}, initial LX(psi) {:.4g}", m.at("initial_map_x"), m.at("initial_lx")));
  o.check(r.trajectory.completed && m.at("t_final") == 100.0, fmt::format("run completed to t = {}", m.at("t_final")));
  o.check(m.at("sup_lx") <= 10.0 * g, fmt::format("sup_t LX(psi) = {:.4g} <= 10 gamma = {:.3g}", m.at("sup_lx"), 10.0 * g));
  o.check(m.at("lambda_min") >= 1.0 - 10.0 * g && m.at("lambda_max") <= 1.0 + 10.0 * g,
          fmt::format("lambda in [{:.6f}, {:.6f}] within [{:.2f}, {:.2f}]", m.at("lambda_min"), m.at("lambda_max"),
                      1.0 - 10.0 * g, 1.0 + 10.0 * g));
  o.check(secs < 300.0, fmt::format("run time {:.1f} s < 300 s", secs));
  o.note(fmt::format("sup_t X-norm of u(t) - Q {:.4g}; mass drift {:.2e} per unit time", m.at("sup_map_x"),
                     m.at("mass_drift_rate")));
  return o;
}

// 7. Instability run at eps = 0.05, gamma = 0.1 to t = 1000.
Outcome instability(Context& c) {
  Outcome o;
  ExperimentSpec s = default_spec(ExperimentKind::kInstability);
  s.cache_dir = c.cache_dir;
  const auto t0 = Clock::now();
  const ExperimentResult r = run_instability(s, c.table, c.propagator());
  const double secs = seconds_since(t0);
  const auto& m = r.metrics;
  const double eg = s.eps * s.gamma;
  o.note(fmt::format("alpha0 = {}, lambda0 = {}", s.alpha0, s.lambda0));
  o.check(r.trajectory.completed && m.at("t_final") == s.evolution.t_end,
          fmt::format("run completed to t = {}", m.at("t_final")));
  o.check(m.at("initial_proximity_hdot1") <= 5.0 * eg,
          fmt::format("||u(0) - Q_(alpha0, lambda0)|| = {:.4g} <= 5 eps gamma = {:.3g}", m.at("initial_proximity_hdot1"),
                      5.0 * eg));
  o.check(m.at("psi0_l2") <= 5.0 * eg, fmt::format("||psi(0)|| = {:.4g} <= 5 gamma eps = {:.3g}", m.at("psi0_l2"), 5.0 * eg));
  o.check(m.at("lambda_ratio") < 0.5,
          fmt::format("|lambda(1000) - 1| / |lambda0 - 1| = {:.4f} < 0.5 (lambda(1000) = {:.6f})", m.at("lambda_ratio"),
                      m.at("lambda_end")));
  o.check(m.at("d_decreasing") == 1.0,
          fmt::format("d(t) non-increasing on [10, 1000]: largest rise between rows {:.3e} (d(10) = {:.5f}, d(1000) = {:.5f})",
                      m.at("d_max_rise"), m.at("d_start"), m.at("d_end")));
  o.note(fmt::format("fit d(t) = a + b / |log t|: a = {:.5f}, b = {:.5f}, rms {:.2e} over {} rows", m.at("fit_a"),
                     m.at("fit_b"), m.at("fit_rms"), m.at("fit_samples")));
  // Where d peaks and how lambda evolves, for the record.
  double d_peak = 0.0, t_peak = 0.0;
  for (const auto& row : r.trajectory.rows) {
    const double d = std::abs(row.psi2_at_1 - cplx(0.0, 1.0));
    if (row.t >= 10.0 && d > d_peak) {
      d_peak = d;
      t_peak = row.t;
    }
  }
  o.note(fmt::format("d peaks at t = {} with {:.5f}", t_peak, d_peak));
  for (const auto& row : r.trajectory.rows)
    if (row.t == 10.0 || row.t == 100.0 || row.t == 500.0)
      o.note(fmt::format("t = {:4}: lambda {:.6f}, alpha {:+.6f}", row.t, row.lambda, row.alpha));
  o.note(fmt::format("linear surrogate relative LX distance at t = {}: {:.3f}", s.surrogate_time,
                     m.at("surrogate_lx_distance")));
  o.check(secs < 600.0, fmt::format("run time {:.1f} s < 600 s", secs));
  return o;
}

// 8. Transference kernel: symmetry and small-xi envelope.
Outcome transference(Context& c) {
  Outcome o;
  const EigenTable& t = c.table;
  std::vector<int> idx;
  for (int i = 0; i < t.size(); i += t.size() / 16) idx.push_back(i);
  idx.push_back(t.size() - 1);
  double asym = 0.0;
  for (int i : idx)
    for (int l : idx) asym = std::max(asym, std::fabs(transference_F(t, i, l) - transference_F(t, l, i)));
  o.check(asym <= 1e-8, fmt::format("max |F(xi, eta) - F(eta, xi)| = {:.3e} <= 1e-8 on a {}x{} sample", asym, idx.size(),
                                    idx.size()));
  const int one = node_near(t, 1.0);
  double lo = 1e300, hi = 0.0;
  int count = 0;
  for (int i = 0; i < t.size(); ++i) {
    const double xi = t.xi()[i];
    if (xi < 1e-3 * (1.0 - 1e-12) || xi > 1e-2 * (1.0 + 1e-12)) continue;
    const double lg = std::log(xi);
    const double ratio = transference_F(t, i, one) / (std::sqrt(xi) / std::sqrt(1.0 + lg * lg));
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    ++count;
  }
  o.check(count > 10 && lo > 0.0 && hi / lo <= 2.0,
          fmt::format("F(xi, 1) / (xi^1/2 / <ln xi>) in [{:.4g}, {:.4g}] on xi in [1e-3, 1e-2] ({} nodes): spread {:.3f} <= 2",
                      lo, hi, count, hi / lo));
  return o;
}

std::set<int> parse_ids(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primary acceptance criteria"};
  std::string cache_dir = "smlab_cache", only, expect_fail;
  app.add_option("--cache-dir", cache_dir, "propagator cache directory");
  app.add_option("--only", only, "comma-separated criteria to run");
  app.add_option("--expect-fail", expect_fail, "comma-separated criteria known to fail");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(Context&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "spectral calibration", spectral_calibration},
      {2, "Plancherel and inversion", plancherel},
      {3, "soliton identities", soliton_identities},
      {4, "elliptic round trip", elliptic_round_trip},
      {5, "conservation and convergence", conservation_convergence},
      {6, "stability property", stability},
      {7, "instability property", instability},
      {8, "transference diagnostic", transference},
  };
  const std::set<int> selected = parse_ids(only), expected = parse_ids(expect_fail);

  Context c;
  c.cache_dir = cache_dir;
  try {
    c.grid = GridSpec{}.make();
    const auto t0 = Clock::now();
    // Built fresh so that criterion 1 times the build.
    c.table = EigenTable::build(c.grid, TableParams{});
    c.table_seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    std::printf("FAIL setup: table build: %s\n", e.what());
    return 1;
  }

  std::set<int> failed;
  std::vector<std::string> summary;
  for (const auto& cr : criteria) {
    if (!selected.empty() && !selected.count(cr.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = cr.fn(c);
    } catch (const std::exception& e) {
      o.check(false, fmt::format("exception: {}", e.what()));
    }
    if (!o.pass) failed.insert(cr.id);
    const char* tag = o.pass ? (expected.count(cr.id) ? "PASS (expected to fail)" : "PASS")
                             : (expected.count(cr.id) ? "FAIL (known)" : "FAIL");
    const std::string line = fmt::format("{} criterion {}: {} [{:.1f} s]", tag, cr.id, cr.name, seconds_since(t0));
    std::printf("%s\n", line.c_str());
    for (const auto& l : o.lines) std::printf("    %s\n", l.c_str());
    std::fflush(stdout);
    summary.push_back(line);
  }
  std::printf("\nSummary\n");
  for (const auto& l : summary) std::printf("  %s\n", l.c_str());

  std::set<int> expected_run;
  for (int id : expected)
    if (selected.empty() || selected.count(id)) expected_run.insert(id);
  if (failed != expected_run) {
    std::printf("failing criteria differ from the expected set\n");
    return 1;
  }
  return 0;
}
