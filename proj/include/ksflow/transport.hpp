#pragma once

#include <vector>

#include "ksflow/field.hpp"

namespace ksflow {

struct TransportResult {
  double w2_squared = 0;
  double epsilon = 0;  // 0 for the exact radial method
  int iterations = 0;
  bool converged = true;
  double marginal_residual = 0;            // L1, mass units
  std::vector<double> quantile_map;        // radial: interleaved (X1(s), X2(s)) samples
  std::vector<double> dual_f, dual_g;      // entropic duals (per cell)
  std::vector<double> residual_history;    // per iteration at the final epsilon
};

struct SinkhornOptions {
  double epsilon = 0;            // <= 0: default 0.05 * spacing * diameter
  double marginal_tol = 1e-8;    // L1 stopping criterion
  int max_iterations = 20000;    // at the final epsilon level
  int anneal_iterations = 40;    // per annealing level
  bool debias = true;
  std::vector<double> warm_f, warm_g;  // optional warm-started duals
};

double default_sinkhorn_epsilon(const GridSpec& grid);

// Exact quadratic Wasserstein distance between radially symmetric unit-mass
// densities by monotone quantile rearrangement (piecewise-linear CDFs).
TransportResult w2_radial(const DensityField& u1, const DensityField& u2);

// Debiased entropic divergence S_eps = OT_eps(u1,u2) - (OT_eps(u1,u1)+OT_eps(u2,u2))/2,
// log-domain throughout; radial grids use the dense 1-D kernel on the radius
// line, full-box grids the separable axis-sweep kernel.
TransportResult w2_sinkhorn(const DensityField& u1, const DensityField& u2,
                            const SinkhornOptions& opts = {});

struct TriangleReport {
  double d12 = 0, d23 = 0, d13 = 0;  // distances (not squared)
  double slack = 0;                  // d12 + d23 - d13
  bool metric_asserted = false;      // true when the exact method was used
};

// Exact radial method asserts the triangle inequality (throws on violation
// beyond tolerance); the entropic method only reports the slack.
TriangleReport w2_triangle_check(const DensityField& u1, const DensityField& u2,
                                 const DensityField& u3, bool use_sinkhorn = false,
                                 const SinkhornOptions& opts = {});

// JSON form of a transport result; when dual_dir is nonempty the dual
// potentials are also dumped in the field binary format (warm-start material
// for the next JKO step) and the paths recorded in the JSON.
std::string transport_result_to_json(const TransportResult& res, const GridSpec& grid,
                                     const std::string& dual_dir = "");

// Monotone quantile samples X(s_k), s_k = (k + 1/2)/count, of a radial density.
std::vector<double> radial_quantiles(const DensityField& u, int count);

// Quantiles at the edges of a uniform mass partition: X(j/count), j = 0..count.
std::vector<double> radial_quantile_edges(const DensityField& u, int count);

}  // namespace ksflow
