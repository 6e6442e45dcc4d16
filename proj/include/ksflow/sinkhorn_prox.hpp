#pragma once

#include <vector>

#include "ksflow/field.hpp"
#include "ksflow/model.hpp"
#include "ksflow/quantile_step.hpp"

namespace ksflow {

struct ProxOptions {
  double epsilon = 0;          // <= 0: grid default
  int max_iterations = 4000;
  double f_rel_tol = 1e-9;     // objective-decrease stopping rule
  double marginal_tol = 1e-8;  // L1 fixed-point residual on the constrained marginal
  std::vector<double> warm_f, warm_g;
};

struct ProxStepResult {
  DensityField u;
  int iterations = 0;
  bool converged = true;
  double clipped_mass = 0;
  double objective = 0;
  std::vector<double> dual_f, dual_g;  // for checkpoints / warm starts
  double epsilon = 0;
};

// Entropic JKO proximal step: minimise OT_eps(u, u_prev)/(2 h chi) + E(u) with
// E(u) = int u^m/(chi(m-1)) - int u v, by generalised Sinkhorn scaling —
// alternate the exact marginal projection onto u_prev with the pointwise
// KL-proximal map of the convex integrand, solved per cell by safeguarded
// Newton on the monotone optimality condition.
ProxStepResult u_step_entropic(const DensityField& u_prev, const ChemField& v,
                               const ModelParams& p, const ProxOptions& opts = {});

}  // namespace ksflow
