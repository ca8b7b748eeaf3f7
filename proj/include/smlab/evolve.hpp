#pragma once

#include <functional>
#include <string>
#include <vector>

#include "smlab/gauge.hpp"
#include "smlab/spectral.hpp"

namespace smlab {

struct EvolutionConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  // 1: Lie splitting, 2: Strang splitting.
  int scheme = 2;
  // Steps between (psi2, A2) reconstructions; W is frozen in between.
  int refresh_every = 1;
  // Time between trajectory rows (rows land exactly on multiples of it).
  double monitor_every = 0.1;
  // Step size at time t: dt * (1 + dt_growth * t), capped at dt_max.
  double dt_growth = 0.0;
  double dt_max = 1.0;
  // Keep a psi snapshot every this many rows (0: none).
  int snapshot_every = 0;
  ReconstructOptions reconstruct;
  // Compute the LX norm monitor (one forward transform per row).
  bool monitor_lx = true;
};

struct TrajectoryRow {
  double t = 0.0;
  double mass = 0.0;
  double lx_norm = 0.0;
  double lambda = 1.0;
  double alpha = 0.0;
  cplx psi2_at_1 = 0.0;
  double a2_at_1 = 0.0;
  double local_energy = 0.0;
};

struct Snapshot {
  double t = 0.0;
  CVec psi;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  std::vector<Snapshot> snapshots;
  // False when the run stopped early; the rows end at the last valid state.
  bool completed = true;
  std::string failure;
  int steps = 0;
};

// F_Ht psi(t) = exp(-i t xi^2) F_Ht psi0. The part of psi0 the table does not
// capture (psi0 - F^-1 F psi0) is carried along unchanged.
CVec linear_flow(const EigenTable& t, const CVec& psi0, double time);

// exp(-i t G) for the symmetric operator G = F^-1 xi^2 F assembled from the
// tapered H~ transform rows. G agrees with H~ on fields the table resolves;
// in the taper zone (xi r between kappa1 and kappa2) it slows outgoing waves
// down instead of aliasing them. The propagator is exactly unitary in the
// grid inner product and exp(-i s G) exp(-i t G) = exp(-i (s + t) G), so
// splitting schemes built on it do not depend on how a time span is cut into
// steps. Fields outside the range of the rows are left unchanged.
class LinearPropagator {
 public:
  LinearPropagator() = default;
  static LinearPropagator build(const EigenTable& t);

  CVec apply(const CVec& psi, double time) const;

  const std::string& table_hash() const { return table_hash_; }
  const Eigen::VectorXd& eigenvalues() const { return lam_; }

  void save(const std::string& path) const;
  static LinearPropagator load(const std::string& path, const EigenTable& t);
  // Conventional cache file name next to the table cache.
  static std::string cache_path(const std::string& dir, const EigenTable& t);
  // Load from the cache directory or build and store there.
  static LinearPropagator load_or_build(const std::string& dir, const EigenTable& t);

 private:
  std::string table_hash_;
  int n_ = 0;
  Eigen::VectorXd sqrt_w_, lam_;
  // Orthonormal eigenvectors of G in sqrt(w)-scaled coordinates.
  Eigen::MatrixXd Z_;
};

// W = A0 - 2 (A2 - h3(lambda r)) / r^2 - Im(psi2 conj(psi)) / r. Where
// |h3(lambda r)| >= 1/2 the difference A2 - h3 is formed from psi2 as
// (h1^2 - |psi2|^2) / (A2 + h3) with A2 = sign(h3) (1 - |psi2|^2)^{1/2}.
Vec potential_W(const RadialGrid& g, const GaugeFields& fields, double lambda = 1.0);

struct EvolutionState {
  double t = 0.0;
  CVec psi;
  GaugeFields fields;
  Vec W;
  int steps_since_refresh = 0;
};

EvolutionState initial_state(const RadialGrid& g, const CVec& psi0, const EvolutionConfig& cfg);

// One splitting step of (i d_t - Ht) psi = W psi with step dt.
void step_nonlinear(const LinearPropagator& prop, const RadialGrid& g, EvolutionState& s, const EvolutionConfig& cfg,
                    double dt);

// Monitors of the current state.
TrajectoryRow monitor(const EigenTable& t, const EvolutionState& s, bool with_lx);

// Called after every trajectory row with the row and the state it describes.
using RowCallback = std::function<void(const TrajectoryRow&, const EvolutionState&)>;

// Time loop from psi0 to cfg.t_end. Reconstruction failures end the run with
// completed = false instead of throwing.
Trajectory run(const EigenTable& t, const LinearPropagator& prop, const CVec& psi0, const EvolutionConfig& cfg,
               const RowCallback& on_row = {});

// Trajectory CSV with header
// t,mass,lx_norm,lambda,alpha,re_psi2_at_1,im_psi2_at_1,a2_at_1,local_energy.
void write_trajectory_csv(const std::string& path, const Trajectory& tr);
std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path);

// Snapshot file: table-companion binary with the grid and table hash.
void write_snapshots(const std::string& path, const EigenTable& t, const std::vector<Snapshot>& snaps);
void write_snapshots(const std::string& path, const RadialGrid& g, const std::string& table_hash,
                     const std::vector<Snapshot>& snaps);
std::vector<Snapshot> read_snapshots(const std::string& path, const RadialGrid& g, const std::string& table_hash);

}  // namespace smlab
