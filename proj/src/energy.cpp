#include "ksflow/energy.hpp"

#include <cmath>
#include <stdexcept>

#include "ksflow/bessel.hpp"
#include "ksflow/elliptic.hpp"
#include "ksflow/par.hpp"

namespace ksflow {

double l2_norm_sq(const GridSpec& grid, std::span<const double> f) {
  return par::sum_terms(f.size(), [&](std::size_t i) {
    return f[i] * f[i] * grid.cell_volume(i);
  });
}

double inner_product(const GridSpec& grid, std::span<const double> a,
                     std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("inner_product: size mismatch");
  return par::sum_terms(a.size(), [&](std::size_t i) {
    return a[i] * b[i] * grid.cell_volume(i);
  });
}

EnergyBreakdown energy(const DensityField& u, const ChemField& v, const ModelParams& p) {
  require_same_grid(u.grid, v.grid, "energy");
  if (!(p.chi > 0)) throw std::invalid_argument("energy: chi > 0 required");
  const double m = p.m();
  EnergyBreakdown e;
  e.diffusion_term = par::sum_terms(u.values.size(), [&](std::size_t i) {
    return std::pow(u.values[i], m) * u.grid.cell_volume(i);
  }) / (p.chi * (m - 1.0));
  e.interaction_term = -inner_product(u.grid, u.values, v.values);
  e.dirichlet_term = 0.5 * grad_norm_sq(v.grid, v.values);
  e.mass_term = 0.5 * p.alpha * l2_norm_sq(v.grid, v.values);
  e.total = e.diffusion_term + e.interaction_term + e.dirichlet_term + e.mass_term;
  e.lower_bound = p.c_hls > 0 ? energy_lower_bound(u, p) : 0.0;
  return e;
}

double energy_lower_bound(const DensityField& u, const ModelParams& p) {
  const double m = p.m();
  const double mass = lp_norm(u, 1.0);
  const double um = std::pow(lp_norm(u, m), m);
  return (p.c_hls / (2.0 * p.chi)) * (p.chi_c() - p.chi * std::pow(mass, 2.0 / p.dim)) * um;
}

double exterior_tail_energy(const ChemField& v) {
  const GridSpec& g = v.grid;
  if (g.dim < 3) return 0.0;
  double v_boundary = 0.0;
  if (g.mode == GridMode::radial) {
    v_boundary = v.values.back();
  } else {
    double acc = 0.0;
    std::size_t count = 0;
    const double edge = g.half_width - g.spacing();
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      const auto x = g.cell_center(i);
      double m = 0;
      for (int a = 0; a < g.dim; ++a) m = std::max(m, std::abs(x[static_cast<std::size_t>(a)]));
      if (m >= edge) {
        acc += v.values[i];
        ++count;
      }
    }
    v_boundary = count > 0 ? acc / static_cast<double>(count) : 0.0;
  }
  const double L = g.half_width;
  return 0.5 * (g.dim - 2) * unit_sphere_area(g.dim) * std::pow(L, g.dim - 2) * v_boundary *
         v_boundary;
}

double energy_decomposition_check(const DensityField& u, const ChemField& v,
                                  const ModelParams& p) {
  if (!(p.alpha > 0))
    throw std::invalid_argument(
        "energy_decomposition_check: unsupported for alpha = 0 (S_0(u) is not H^1)");
  require_same_grid(u.grid, v.grid, "energy_decomposition_check");
  const ChemField s = apply_bessel(u, p.alpha);
  const double lhs = energy(u, v, p).total;
  std::vector<double> diff(v.values.size());
  par::for_each(diff.size(), [&](std::size_t i) { diff[i] = v.values[i] - s.values[i]; });
  const double rhs = energy(u, s, p).total + 0.5 * grad_norm_sq(v.grid, diff) +
                     0.5 * p.alpha * l2_norm_sq(v.grid, diff);
  return std::abs(lhs - rhs);
}

}  // namespace ksflow
