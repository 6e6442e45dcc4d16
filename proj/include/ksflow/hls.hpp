#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ksflow/field.hpp"

namespace ksflow {

// int h S_alpha(h) / (||h||_m^m ||h||_1^{2/d}).
double hls_ratio(const GridSpec& grid, std::span<const double> h, double alpha);

struct HlsRefinementRow {
  int points = 0;
  double estimate = 0;
  double rel_change = 0;  // vs previous row
};

struct HlsEstimate {
  int dim = 3;
  double c_hls = 0;
  double chi_c = 0;
  std::string profile;  // best seed family descriptor
  std::vector<HlsRefinementRow> history;
  bool converged = false;
  std::uint64_t seed = 0;
};

struct HlsSearchConfig {
  int points = 256;         // finest radial resolution
  int levels = 2;           // refinement ladder N, 2N, ...
  double half_width = 16;   // generous box so dilations fit
  int ascent_iterations = 400;
  double ascent_tol = 1e-8;
  std::uint64_t seed = 1;
  int jitter_candidates = 4;  // seeded multiplicative perturbations of the best seed
};

// Lower-bound estimator for the variant Hardy-Littlewood-Sobolev constant:
// a parametric seed scan (generalised Gaussians, compact bumps) followed by
// projected gradient ascent on the cell values, on a refinement ladder.
HlsEstimate estimate_c_hls(int dim, const HlsSearchConfig& config = {});

std::string hls_estimate_to_json(const HlsEstimate& e);
HlsEstimate hls_estimate_from_json(const std::string& text);

// Calibrated constant C1 for |grad v|^2 + alpha |v|^2 <= 4 E + C1 |u|_1^{2/d} |u|_m^m,
// via the measured Holder-Sobolev constant of |uv|_1 on a deterministic corpus.
double calibrate_gradient_bound_constant(int dim, int points, double half_width);

}  // namespace ksflow
