#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smlab/evolve.hpp"

namespace smlab {

enum class ExperimentKind { kStability, kInstability, kLinearDecay, kTableBuild };

std::string to_string(ExperimentKind k);
// Accepts "stability", "instability", "linear-decay", "table-build".
ExperimentKind parse_experiment_kind(const std::string& s);

struct GridSpec {
  double r_min = 1e-4;
  double r_max = 1e4;
  int n = 4096;
  RadialGrid make() const { return RadialGrid::log_uniform(r_min, r_max, n); }
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kStability;
  // Transition scale of the instability data (transition on r in [0.5, 2] / eps).
  double eps = 0.05;
  // Perturbation size: X-norm of the stability perturbation, |alpha0| +
  // |lambda0 - 1| scale of the instability data, amplitude of the
  // linear-decay bump.
  double gamma = 0.01;
  double alpha0 = 0.0;
  double lambda0 = 1.0;
  GridSpec grid;
  TableParams table;
  EvolutionConfig evolution;
  // Output prefix: <output>.csv (trajectory) and <output>.json (summary).
  std::string output = "smlab_run";
  // Directory holding cached tables and propagators.
  std::string cache_dir = "smlab_cache";
  std::uint64_t seed = 1;
  // Stability data: number of random log-Gaussian bumps.
  int bumps = 3;
  // Linear-decay sample times.
  std::vector<double> decay_times = {1.0, 10.0, 100.0};
  // Instability: the d(t) fit uses rows with t >= fit_t_min; the linear
  // surrogate is compared at surrogate_time (a multiple of the monitor cadence).
  double fit_t_min = 10.0;
  double surrogate_time = 100.0;
};

// Defaults used by the CLI for each kind (run lengths, step schedule, gamma).
ExperimentSpec default_spec(ExperimentKind k);

// Rejects inconsistent specs with ConfigError.
void validate(const ExperimentSpec& s);

// JSON form of a spec. Keys mirror the struct fields; the grid, table and
// evolution settings are nested objects. Unknown keys are rejected.
std::string spec_to_json(const ExperimentSpec& s);
// Keys absent from the text keep their values from `base`.
ExperimentSpec spec_from_json(const std::string& text, const ExperimentSpec& base);
ExperimentSpec spec_from_json(const std::string& text);

// u = Q_{alpha0,lambda0} for r <= 0.5/eps, Q for r >= 2/eps, and the
// great-circle interpolation between them with a C-infinity ramp in log r.
SphereProfile make_instability_data(double eps, double gamma, double alpha0, double lambda0, const RadialGrid& g);

// Q moved along the exponential map by a seeded sum of complex log-Gaussian
// bumps (centers in [0.3, 3]) whose tangent field has X-norm gamma.
SphereProfile make_stability_data(const EigenTable& t, double gamma, std::uint64_t seed, int bumps);

// (u - Q) . v_Q + i (u - Q) . w_Q with v_Q = (h3, 0, -h1), w_Q = (0, 1, 0).
CVec tangent_coordinates(const RadialGrid& g, const SphereProfile& u);
// X-norm of the tangent coordinates of u relative to Q.
double map_norm_X(const EigenTable& t, const SphereProfile& u);

// Least-squares fit d(t) = a + b / |log t| on the samples with t >= t_min.
struct InverseLogFit {
  double a = 0.0;
  double b = 0.0;
  double rms = 0.0;
  int samples = 0;
};
InverseLogFit fit_inverse_log(const std::vector<double>& t, const std::vector<double>& d, double t_min);

struct ExperimentResult {
  ExperimentSpec spec;
  Trajectory trajectory;
  // Named scalar results (see README for the list per kind).
  std::map<std::string, double> metrics;
  std::string grid_hash;
  std::string table_hash;
};

// Summary JSON: spec, grid and table hashes, completion status, metrics.
std::string summary_json(const ExperimentResult& r);

// The runners take a table and propagator built on spec.grid and spec.table.
ExperimentResult run_stability(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p,
                               const RowCallback& on_row = {});
ExperimentResult run_instability(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p,
                                 const RowCallback& on_row = {});
ExperimentResult run_linear_decay(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p);
ExperimentResult run_experiment(const ExperimentSpec& s, const EigenTable& t, const LinearPropagator& p,
                                const RowCallback& on_row = {});

// Table and propagator for a spec from spec.cache_dir. With build = false a
// missing table raises IoError naming the expected cache path.
struct TableBundle {
  EigenTable table;
  LinearPropagator propagator;
};
TableBundle load_tables(const ExperimentSpec& s, bool build);

// Writes <output>.csv and <output>.json.
void write_outputs(const ExperimentResult& r);

// Field files are text: a header line "# smlab-field map" followed by rows
// "r u1 u2 u3", or "# smlab-field psi" followed by rows "r re im". The nodes
// must form a log-uniform grid; it is recovered from the first and last node
// and the row count.
struct FieldFile {
  enum class Kind { kMap, kPsi };
  Kind kind = Kind::kMap;
  RadialGrid grid;
  SphereProfile u;  // kMap
  CVec psi;         // kPsi
};
void write_map_file(const std::string& path, const RadialGrid& g, const SphereProfile& u);
void write_psi_file(const std::string& path, const RadialGrid& g, const CVec& psi);
FieldFile read_field_file(const std::string& path);

// Norms of a field file against a table on the same grid. Maps report the
// X-norm of their tangent coordinates relative to Q, the energy distance to Q,
// the energy, and the size of the reduced field; psi files report L2 and LX.
std::map<std::string, double> field_norms(const FieldFile& f, const EigenTable& t);

}  // namespace smlab
