#pragma once

#include "ksflow/field.hpp"
#include "ksflow/model.hpp"

namespace ksflow {

struct UStepOptions {
  int max_iterations = 200;
  double f_rel_tol = 1e-9;  // relative objective-decrease stopping rule
  int pieces_per_cell = 1;  // Lagrangian sub-shells per cell at initialisation
};

// Radial Lagrangian representation: fixed masses on moving shells of constant
// density. Built once from the initial density (edges = the cell volume
// partition, so the initial deposit reproduces it exactly) and then evolved;
// cell fields are deposited views, which keeps re-Eulerianisation smear out of
// the dynamics entirely.
struct LagrangianState {
  std::vector<double> edges;   // size pieces + 1, nondecreasing, in [0, L]
  std::vector<double> masses;  // size pieces, nonnegative, fixed along a run
};

LagrangianState lagrangian_from_cells(const DensityField& u, int pieces_per_cell = 1);

// Density deposited from the shells (constant density per shell); conservative.
DensityField deposit_from_pieces(const GridSpec& grid, std::span<const double> edges,
                                 std::span<const double> masses);

// Exact squared quantile distance between two edge configurations sharing one
// mass partition.
double lagrangian_w2_sq(int dim, const LagrangianState& a, std::span<const double> other_edges);

struct QuantileStepResult {
  LagrangianState state;
  DensityField u;        // deposited view on the grid
  double w2_sq = 0;      // exact transport cost against the base state
  int iterations = 0;
  bool converged = true;
  double clipped_mass = 0;
  double objective = 0;
};

// One JKO half-step in u: minimise
//   W2^2(u, u_base)/(2 h chi) + int u^m/(chi(m-1)) - int u v
// over the shell edges, with the exact quantile-coordinate W2 term (damped
// tridiagonal Newton with a monotonicity projection).
QuantileStepResult u_step_quantile(const GridSpec& grid, const LagrangianState& base,
                                   const ChemField& v, const ModelParams& p,
                                   const UStepOptions& opts = {},
                                   const std::vector<double>* warm_edges = nullptr);

struct UStepResult {
  DensityField u;
  int iterations = 0;
  bool converged = true;
  double clipped_mass = 0;
  double objective = 0;
};

// Convenience wrapper: build a fresh Lagrangian partition from u_prev, take
// one step, return the deposited density.
UStepResult u_step_quantile(const DensityField& u_prev, const ChemField& v,
                            const ModelParams& p, const UStepOptions& opts = {});

}  // namespace ksflow
