#pragma once

#include <cstdint>
#include <string>

#include "ksflow/fd.hpp"
#include "ksflow/field.hpp"
#include "ksflow/jko.hpp"
#include "ksflow/model.hpp"

namespace ksflow {

enum class SolverKind { jko, fd, both };
enum class InitFamily { gaussian, shell, two_bump, from_file };
enum class InitChem { bessel, zero, from_file };

// A fully specified experiment. Parsed from flat key = value text with dotted
// sections and '#' comments.
struct Scenario {
  // grid.*
  GridSpec grid = GridSpec::radial(3, 256, 8.0);
  // model.*
  double chi = 0;          // model.chi: absolute value
  double chi_rel = 0;      // model.chi_rel: fraction of chi_c (one of the two)
  double alpha = 1.0;
  double tau = 1.0;
  double h = 1e-3;
  double c_hls = 0;        // model.c_hls: number, or 0 for "estimate"
  // init.*
  InitFamily family = InitFamily::gaussian;
  double sigma = 0.5;
  double center = 0;
  double radius = 2.0;
  double width = 0.4;
  double separation = 2.0;
  std::string density_path;
  InitChem chem = InitChem::bessel;
  std::string chem_path;
  // run.*
  SolverKind solver = SolverKind::jko;
  double t_final = 0.5;
  int stride = 50;
  std::uint64_t seed = 1;
  // ot.*, fd.*, jko.*, tol.*
  double ot_epsilon = 0;
  double fd_dt = 1e-3;
  bool jko_entropic = false;
  int regularity_every = 0;
  double energy_slack = 1e-8;

  std::string source_text;  // canonical echo input
};

// Throws std::invalid_argument with "line N: ..." on malformed input.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

// FNV-1a of the canonical serialisation; carried on every output row.
std::uint64_t scenario_hash(const Scenario& s);

std::string scenario_to_json(const Scenario& s, double resolved_chi, double resolved_c_hls);

// Materialise the initial data; the discretised profile is renormalised to
// unit mass exactly once and the pre-normalisation integral is reported.
DensityField build_initial_density(const Scenario& s, double* raw_mass = nullptr);
ChemField build_initial_chem(const Scenario& s, const DensityField& u0);

// Resolve chi / c_hls (running the estimator when requested) and assemble the
// model parameters; exploratory flag handled by the caller.
ModelParams resolve_params(const Scenario& s, double* out_c_hls = nullptr);

}  // namespace ksflow
