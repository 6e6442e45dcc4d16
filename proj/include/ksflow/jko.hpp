#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ksflow/energy.hpp"
#include "ksflow/field.hpp"
#include "ksflow/model.hpp"
#include "ksflow/quantile_step.hpp"
#include "ksflow/sinkhorn_prox.hpp"

namespace ksflow {

struct JkoOptions {
  UStepOptions quantile;
  ProxOptions prox;
  bool use_entropic = false;  // force the entropic u-step on radial grids
  int max_sweeps = 25;
  double sweep_rel_tol = 1e-9;   // joint-stationarity stopping rule on F
  double energy_slack = 1e-8;    // allowed per-step energy increase
  bool track_el_residual_u = true;
  int regularity_every = 0;      // 0: off; k: diagnostic every k-th step
  int regularity_substeps = 16;
  double regularity_horizon_steps = 10;  // s_max = this * h
  int calibration_steps = 25;            // steps used to calibrate C2
};

struct StepReport {
  int step_index = 0;
  double w2_sq_increment = 0;
  double v_increment_sq = 0;
  EnergyBreakdown energy_before;
  EnergyBreakdown energy_after;
  double el_residual_v = 0;
  double el_residual_u = 0;
  double entropy = 0;
  int inner_iterations = 0;
  int sweeps = 0;
  bool converged = true;
  double clipped_mass = 0;
  double mass_drift = 0;
};

// Thrown when a step breaks a hard invariant (energy increase, mass loss).
struct TrajectoryError : std::runtime_error {
  StepReport report;
  TrajectoryError(const std::string& what, StepReport rep)
      : std::runtime_error(what), report(std::move(rep)) {}
};

struct JkoState {
  DensityField u;
  ChemField v;
  std::vector<double> dual_f, dual_g;  // entropic warm starts (checkpointed)
  LagrangianState lag;  // radial path: persistent mass partition (checkpointed)
};

// Exact minimiser of F over v for fixed u: (tau/h + alpha - Lap) v = u + (tau/h) v_prev.
ChemField v_step(const DensityField& u, const ChemField& v_prev, const ModelParams& p);
double v_step_residual(const DensityField& u, const ChemField& v_prev, const ChemField& v,
                       const ModelParams& p);

// One minimising-movement step: alternate u- and v-minimisation to joint
// stationarity; emits the per-step record and enforces the energy and mass
// invariants (TrajectoryError on breach).
StepReport jko_step(JkoState& state, const ModelParams& p, const JkoOptions& opts = {});

struct DiagnosticsRow {
  int step = 0;
  double t = 0;
  double energy_total = 0, energy_diffusion = 0, energy_interaction = 0, energy_dirichlet = 0,
         energy_mass = 0;
  double lm_norm = 0, grad_v_l2 = 0, v_l2 = 0, second_moment = 0, entropy = 0;
  double w2_sq_inc = 0, v_inc_sq = 0;
  double el_res_v = 0, el_res_u = 0;
  double max_density = 0, tail_mass = 0;
  double diss_diffusion = 0, diss_chem = 0, flux_norm = 0;
  double cum_increment = 0;
  int inner_iterations = 0;
};

struct RegularityReport {
  double s_max = 0;
  double avg_dissipation = 0;
  double a_h0 = 0;
  double bound_rhs = 0;      // 2 A_h(0) + C2 (E + E^{1/(m-1)})
  double measured_c2 = 0;    // (avgD - 2 A_h0)+ / (E + E^{1/(m-1)})
  double c2_used = 0;
  bool within_bound = true;
  bool entropy_sign_ok = true;          // H[u_prev] >= H[U(s)] for all s > 0
  bool flow_entropy_monotone = true;    // H[U(s)] non-increasing along the flow
  bool dissipation_monotone = true;     // D(s) non-increasing up to 1% slack
  std::vector<double> dissipation_series;
};

// Auxiliary heat-flow diagnostic of the per-step regularity estimate.
// (u_in, v_in) is the step input, (u, v) the accepted minimiser.
RegularityReport regularity_diagnostic(const DensityField& u_in, const ChemField& v_in,
                                       const DensityField& u, const ChemField& v,
                                       const ModelParams& p, double s_max, int substeps,
                                       double c2 = 0);

struct Trajectory {
  ModelParams params;
  std::vector<DiagnosticsRow> rows;       // one per step
  std::vector<double> snapshot_times;
  std::vector<JkoState> snapshots;        // at stride boundaries (plus initial/final)
  std::vector<double> snapshot_cum;       // running increment sum at each snapshot
  double initial_energy = 0;
  double cum_increment = 0;               // sum of [W2^2/chi + tau |dv|^2]
  double c5_lm = 0;        // L^m bound from the energy inequality
  double c5_v = 0;         // coefficient for |v|^2 <= c5_v (1+t)
  double c5_moment = 0;    // coefficient for moment <= c5_moment (1+t)
  double c2_calibrated = 0;
  double max_mass_drift = 0;
  double max_clipped_mass = 0;
  bool lm_bound_ok = true;
  bool telescoping_ok = true;
  bool regularity_ok = true;
  bool entropy_sign_ok = true;
  bool completed = true;
  std::string halt_reason;
  int steps = 0;
};

// Continuation bookkeeping so a checkpointed run replays bit-exactly: the
// global step counter, the accumulated increment sum and the run's initial
// energy all persist across the checkpoint boundary.
struct TrajectoryResume {
  int start_step = 0;
  double cum_increment = 0;
  double initial_energy = 0;
  LagrangianState lag;  // persistent mass partition at the checkpoint
};

Trajectory run_trajectory(const DensityField& u0, const ChemField& v0, const ModelParams& p,
                          double t_final, int stride, const JkoOptions& opts = {},
                          const TrajectoryResume* resume = nullptr);

struct ModulusReport {
  double c7_v = 0;           // max |v(t)-v(s)|_2 / (sqrt(t-s) + sqrt(h))
  double c7_u = 0;           // dual-norm modulus with the (m-1)/2m exponent
  std::size_t pairs = 0;
};

// Time-equicontinuity moduli measured over the stored snapshots; the u-modulus
// uses the spectral surrogate |(1 - Lap)^{-3} w|_2 for the negative-order norm.
ModulusReport time_modulus(const Trajectory& traj);

}  // namespace ksflow
