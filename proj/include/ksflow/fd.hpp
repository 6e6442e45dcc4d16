#pragma once

#include <string>
#include <vector>

#include "ksflow/field.hpp"
#include "ksflow/jko.hpp"
#include "ksflow/model.hpp"

namespace ksflow {

struct FdConfig {
  double dt = 1e-3;
  double t_final = 0.5;
  bool flux_limiter = true;  // minmod-limited drift reconstruction vs donor cell
  double cfl_safety = 0.8;
};

struct FdState {
  DensityField u;
  ChemField v;
  double t = 0;
};

// drift CFL bound dt <= safety * h / max|chi grad v| (checked at start, and the
// step aborts with a stability error when negativity appears anyway)
double fd_cfl_bound(const FdState& state, const FdConfig& config, const ModelParams& p);

// One semi-implicit conservative step: explicit upwind chemotactic drift,
// backward-Euler nonlinear diffusion with the lagged coefficient m u^{m-1},
// backward-Euler linear v-equation.
void fd_step(FdState& state, const FdConfig& config, const ModelParams& p);

struct FdTrajectory {
  ModelParams params;
  FdConfig config;
  std::vector<DiagnosticsRow> rows;  // subset of fields populated
  std::vector<double> snapshot_times;
  std::vector<FdState> snapshots;
  double max_mass_drift = 0;
  double max_energy_increase = 0;  // observed, reported (no exact discrete law)
  bool completed = true;
  std::string halt_reason;
};

FdTrajectory run_fd(const DensityField& u0, const ChemField& v0, const ModelParams& p,
                    const FdConfig& config, int stride);

struct CompareRow {
  double t = 0;
  double lm_gap_rel = 0;      // |u_jko - u_fd|_m / |u_jko|_m
  double v_gap_rel = 0;       // weighted-H1 relative gap
  double energy_jko = 0;
  double energy_fd = 0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  double max_lm_gap = 0;
  double final_lm_gap = 0;
  std::string caveat;  // minimiser-selection caveat carried on every report
};

CompareReport compare_trajectories(const Trajectory& jko, const FdTrajectory& fd,
                                   const ModelParams& p);

}  // namespace ksflow
