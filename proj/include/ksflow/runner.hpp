#pragma once

#include <map>
#include <string>
#include <vector>

#include "ksflow/hls.hpp"
#include "ksflow/scenario.hpp"

namespace ksflow {

// 0 pass, 2 invariant breach, 3 config error, 4 non-convergence
enum ExitCode : int {
  kExitOk = 0,
  kExitInvariantBreach = 2,
  kExitConfigError = 3,
  kExitNonConvergence = 4,
};

struct RunSummary {
  int exit_code = kExitOk;
  bool exploratory = false;
  std::map<std::string, bool> checks;
  std::string out_dir;
  std::string halt_reason;
  double resolved_chi = 0;
  double resolved_c_hls = 0;
  double sup_lm_pow_m = 0;   // sup_t |u|_m^m over the run
  double lm_bound = 0;       // 2 chi E0 / (C_HLS (chi_c - chi)), 0 when exploratory
  double final_energy = 0;
  double final_v_gap = 0;    // |v - S_alpha(u)| / |v| at T (mean-adjusted at alpha = 0)
  double init_raw_mass = 0;  // discretised initial mass before the one-time renormalisation
  std::uint64_t hash = 0;
};

// Deterministic artifacts: config_echo.json, diagnostics.csv (one row per
// step, every row tagged with the scenario hash), field checkpoints at stride
// boundaries, summary.json with pass/fail per invariant.
RunSummary run_scenario(const Scenario& s, const std::string& out_dir);

// Continue a checkpointed run to its configured t_final; byte-identical
// continuation rows given the same config and seed.
RunSummary resume_run(const std::string& ckpt_prefix, const std::string& out_dir);

struct SweepResult {
  int exit_code = kExitOk;
  std::vector<RunSummary> members;
  std::string report_path;
};

// axis in {chi, h, N, tau, alpha}; member runs dispatch on a worker pool and
// the comparative report is assembled after a deterministic ordered join.
SweepResult run_sweep(const Scenario& base, const std::string& axis,
                      const std::vector<double>& values, int workers,
                      const std::string& out_dir);

struct ChiCReport {
  HlsEstimate estimate;
  int exit_code = kExitOk;
  std::string json_path;
};

ChiCReport run_chi_c(int dim, const HlsSearchConfig& cfg, const std::string& out_dir);

struct ValidationItem {
  std::string name;
  bool pass = false;
  std::string detail;
};

// The toy-grid invariant battery behind the `validate` subcommand.
std::vector<ValidationItem> run_validation_suite();

// solver=both orchestration with the cross-solver comparison artifact.
RunSummary run_compare(const Scenario& s, const std::string& out_dir);

void write_diagnostics_csv(const std::string& path, const std::string& solver,
                           std::uint64_t hash, const std::vector<DiagnosticsRow>& rows);

}  // namespace ksflow
