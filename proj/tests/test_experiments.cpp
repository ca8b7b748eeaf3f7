#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bundle.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "smlab/error.hpp"
#include "smlab/experiments.hpp"
#include "smlab/gauge.hpp"
#include "smlab/profiles.hpp"

using namespace smlab;
using namespace testing_support;

namespace {

const EigenTable& table() { return default_bundle().table; }
const LinearPropagator& prop() { return default_bundle().propagator; }
const RadialGrid& grid() { return table().grid(); }

double japanese(double x) { return std::sqrt(1.0 + x * x); }

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir() {
  const auto d = std::filesystem::temp_directory_path() / "smlab_experiments_test";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("instability data: soliton inside, Q outside, on the sphere") {
  const RadialGrid& g = grid();
  const double eps = 0.05, gamma = 0.1;
  const SphereProfile u = make_instability_data(eps, gamma, 0.05, 1.05, g);
  const SphereProfile qa = soliton_profile({1, 0.05, 1.05}, g), q = soliton_profile({1, 0.0, 1.0}, g);
  CHECK(sphere_defect(u) < 1e-12);
  double inner = 0.0, outer = 0.0;
  for (int j = 0; j < g.size(); ++j) {
    const double r = g.r(j);
    const double da = std::fabs(u.u1[j] - qa.u1[j]) + std::fabs(u.u2[j] - qa.u2[j]) + std::fabs(u.u3[j] - qa.u3[j]);
    const double dq = std::fabs(u.u1[j] - q.u1[j]) + std::fabs(u.u2[j] - q.u2[j]) + std::fabs(u.u3[j] - q.u3[j]);
    if (r <= 0.5 / eps) inner = std::max(inner, da);
    if (r >= 2.0 / eps) outer = std::max(outer, dq);
  }
  CHECK(inner == 0.0);
  CHECK(outer < 1e-15);
}

TEST_CASE("instability data: proximity, reduced field size, support and spectrum") {
  const RadialGrid& g = grid();
  for (double eps : {0.05, 0.1}) {
    const double gamma = 0.1;
    const SphereProfile u = make_instability_data(eps, gamma, 0.05, 1.05, g);
    const SphereProfile qa = soliton_profile({1, 0.05, 1.05}, g);
    CHECK(hdot1_distance(g, u, qa) <= 5.0 * eps * gamma);
    const CVec psi = derive_fields(g, u, coulomb_frame(g, u)).psi;
    CHECK(l2_norm(g, psi) <= 5.0 * gamma * eps);
    // Mass outside the annulus [eps^-1 / 4, 4 eps^-1].
    double out = 0.0, all = 0.0, amp = 0.0;
    for (int j = 0; j < g.size(); ++j) {
      const double m = g.weights()[j] * std::norm(psi[j]);
      all += m;
      if (g.r(j) < 0.25 / eps || g.r(j) > 4.0 / eps) out += m;
      amp = std::max(amp, std::abs(psi[j]));
    }
    CHECK(out <= 1e-6 * all);
    // Amplitude of order gamma eps^2.
    INFO("eps " << eps << " sup|psi| / (gamma eps^2) = " << amp / (gamma * eps * eps));
    CHECK(amp <= 5.0 * gamma * eps * eps);
    CHECK(amp >= 0.05 * gamma * eps * eps);
    // Fourier envelope gamma (<ln eps> / <ln xi>) xi^1/2 <xi / eps>^-3.
    const CVec c = table().forward(psi, Frame::kHt);
    // The constant is only checked to order of magnitude; below xi = eps / 10
    // the ratio is pinned near one.
    double cmax = 0.0, low_min = 1e300, low_max = 0.0;
    for (int i = 0; i < table().size(); ++i) {
      const double xi = table().xi()[i];
      const double env = gamma * japanese(std::log(eps)) / japanese(std::log(xi)) * std::sqrt(xi) *
                         std::pow(japanese(xi / eps), -3.0);
      const double ratio = std::abs(c[i]) / env;
      cmax = std::max(cmax, ratio);
      if (xi <= 0.1 * eps) {
        low_min = std::min(low_min, ratio);
        low_max = std::max(low_max, ratio);
      }
    }
    INFO("eps " << eps << " envelope constant " << cmax << " small-xi range [" << low_min << ", " << low_max << "]");
    CHECK(cmax <= 100.0);
    CHECK(low_min >= 0.5);
    CHECK(low_max <= 2.0);
  }
}

TEST_CASE("instability data: parameter checks") {
  const RadialGrid& g = grid();
  CHECK_THROWS_AS(make_instability_data(0.3, 0.1, 0.05, 1.05, g), ParameterError);
  CHECK_THROWS_AS(make_instability_data(0.05, 0.1, 0.0, 1.01, g), ParameterError);
  CHECK_THROWS_AS(make_instability_data(0.05, 0.1, 0.3, 1.0, g), ParameterError);
  const RadialGrid small = RadialGrid::log_uniform(1e-3, 30.0, 512);
  CHECK_THROWS_AS(make_instability_data(0.05, 0.1, 0.05, 1.05, small), RangeError);
}

TEST_CASE("tangent coordinates and the map X-norm") {
  const RadialGrid& g = grid();
  CHECK(map_norm_X(table(), soliton_profile({1, 0.0, 1.0}, g)) == 0.0);
  const SphereProfile u = make_stability_data(table(), 0.01, 7, 3);
  CHECK(sphere_defect(u) < 1e-12);
  CHECK(map_norm_X(table(), u) == doctest::Approx(0.01).epsilon(0.01));
  // Deterministic in the seed.
  const SphereProfile v = make_stability_data(table(), 0.01, 7, 3);
  const SphereProfile w = make_stability_data(table(), 0.01, 8, 3);
  CHECK(max_diff(u, v) == 0.0);
  CHECK(max_diff(u, w) > 1e-4);
  CHECK(map_norm_X(table(), make_stability_data(table(), 0.0, 7, 3)) == 0.0);
}

TEST_CASE("inverse-log fit recovers exact data") {
  std::vector<double> t, d;
  for (double x = 10.0; x <= 1000.0; x *= 1.2) {
    t.push_back(x);
    d.push_back(0.01 + 0.3 / std::log(x));
  }
  t.push_back(2.0);
  d.push_back(5.0);  // outside the window
  const InverseLogFit fit = fit_inverse_log(t, d, 10.0);
  CHECK(fit.a == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(fit.b == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(fit.rms < 1e-12);
  CHECK_THROWS_AS(fit_inverse_log({20.0}, {1.0}, 10.0), NumericalError);
}

TEST_CASE("spec JSON round trip and rejection") {
  ExperimentSpec s = default_spec(ExperimentKind::kInstability);
  s.seed = 42;
  s.evolution.dt = 0.02;
  s.table.kappa1 = 120.0;
  s.decay_times = {2.0, 3.0};
  const ExperimentSpec back = spec_from_json(spec_to_json(s));
  CHECK(spec_to_json(back) == spec_to_json(s));
  CHECK(back.seed == 42);
  CHECK(back.evolution.dt == 0.02);
  CHECK(back.kind == ExperimentKind::kInstability);
  // Partial configs start from the defaults of their kind.
  const ExperimentSpec partial = spec_from_json(R"({"kind": "stability", "gamma": 0.02})");
  CHECK(partial.gamma == 0.02);
  CHECK(partial.evolution.t_end == default_spec(ExperimentKind::kStability).evolution.t_end);
  CHECK_THROWS_AS(spec_from_json(R"({"kind": "stability", "gama": 0.02})"), ConfigError);
  CHECK_THROWS_AS(spec_from_json(R"({"evolution": {"dt": "fast"}})"), ConfigError);
  CHECK_THROWS_AS(spec_from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(spec_from_json(R"({"kind": "sideways"})"), ConfigError);
  ExperimentSpec bad = default_spec(ExperimentKind::kInstability);
  bad.eps = 0.5;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = default_spec(ExperimentKind::kInstability);
  bad.alpha0 = 0.0;
  bad.lambda0 = 1.3;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = default_spec(ExperimentKind::kStability);
  bad.evolution.dt = -1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("missing table names the cache path") {
  ExperimentSpec s;
  s.cache_dir = (scratch_dir() / "empty_cache").string();
  try {
    load_tables(s, false);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(EigenTable::cache_path(s.cache_dir, s.grid.make(), s.table)) != std::string::npos);
  }
}

TEST_CASE("stability run with gamma = 0 stays at the soliton") {
  ExperimentSpec s = default_spec(ExperimentKind::kStability);
  s.cache_dir = SMLAB_TEST_CACHE;
  s.gamma = 0.0;
  s.evolution.t_end = 1.0;
  s.evolution.monitor_every = 0.5;
  const ExperimentResult r = run_stability(s, table(), prop());
  REQUIRE(r.trajectory.completed);
  // Zero up to the Picard tolerance of the field reconstruction.
  CHECK(r.metrics.at("sup_lx") < 1e-8);
  CHECK(r.metrics.at("sup_map_x") < 1e-8);
  CHECK(std::fabs(r.metrics.at("lambda_min") - 1.0) < 1e-8);
  CHECK(std::fabs(r.metrics.at("lambda_max") - 1.0) < 1e-8);
  CHECK(r.metrics.at("alpha_max_abs") < 1e-8);
}

TEST_CASE("short stability run: deterministic outputs with provenance") {
  ExperimentSpec s = default_spec(ExperimentKind::kStability);
  s.cache_dir = SMLAB_TEST_CACHE;
  s.evolution.t_end = 1.0;
  s.evolution.monitor_every = 0.5;
  s.output = (scratch_dir() / "stab_a").string();
  const ExperimentResult a = run_stability(s, table(), prop());
  write_outputs(a);
  s.output = (scratch_dir() / "stab_b").string();
  const ExperimentResult b = run_stability(s, table(), prop());
  write_outputs(b);
  CHECK(slurp(a.spec.output + ".csv") == slurp(b.spec.output + ".csv"));
  const auto j = nlohmann::json::parse(slurp(a.spec.output + ".json"));
  CHECK(j["grid_hash"] == grid().hash());
  CHECK(j["table_hash"] == table().hash());
  CHECK(j["spec"]["kind"] == "stability");
  CHECK(j["completed"] == true);
  CHECK(j["metrics"]["sup_lx"].get<double>() > 0.0);
  CHECK(a.metrics.at("mass_drift_rate") < 1e-6);
  // Relative to E; evolved data carries content near the table's resolution
  // limit, where the map reconstruction is least accurate.
  CHECK(a.metrics.at("energy_identity_defect") < 1e-6 * 4.0 * M_PI);
  CHECK(a.metrics.at("initial_map_x") == doctest::Approx(s.gamma).epsilon(0.01));
}

TEST_CASE("linear-decay experiment") {
  ExperimentSpec s = default_spec(ExperimentKind::kLinearDecay);
  s.cache_dir = SMLAB_TEST_CACHE;
  const ExperimentResult r = run_linear_decay(s, table(), prop());
  CHECK(r.metrics.at("propagator_local_fraction_t100") < 0.1);
  for (const char* t : {"1", "10", "100"})
    CHECK(std::fabs(r.metrics.at(std::string("propagator_norm_ratio_t") + t) - 1.0) < 1e-4);
  CHECK(r.trajectory.rows.size() == 3);
}

TEST_CASE("runners refuse a table built for another grid") {
  ExperimentSpec s = default_spec(ExperimentKind::kStability);
  s.grid.n = 2048;
  CHECK_THROWS_AS(run_stability(s, table(), prop()), ConfigError);
}
