#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ksflow/grid.hpp"
#include "ksflow/par.hpp"

namespace ksflow {

// Non-negative density on a grid; unit mass is the standing invariant and is
// asserted (tolerance 1e-10) by every public operation that should preserve it.
struct DensityField {
  GridSpec grid;
  std::vector<double> values;
};

// Chemical concentration; unconstrained sign.
struct ChemField {
  GridSpec grid;
  std::vector<double> values;
};

inline constexpr double kMassTol = 1e-10;

namespace detail {
inline void check_finite(const GridSpec& grid, std::span<const double> f, const char* where) {
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) {
      const auto x = grid.cell_center(i);
      throw std::domain_error(std::string(where) + ": non-finite value at cell " +
                              std::to_string(i) + " (x = " + std::to_string(x[0]) + ", " +
                              std::to_string(x[1]) + ", " + std::to_string(x[2]) + ")");
    }
  }
}
}  // namespace detail

inline double total_mass(const GridSpec& grid, std::span<const double> f) {
  return par::sum_terms(f.size(), [&](std::size_t i) { return f[i] * grid.cell_volume(i); });
}

inline double total_mass(const DensityField& u) { return total_mass(u.grid, u.values); }

// (sum |f_i|^p vol_i)^{1/p}; the radial volume element carries r^{d-1}.
inline double lp_norm(const GridSpec& grid, std::span<const double> f, double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("lp_norm: p >= 1 required");
  if (f.size() != grid.cell_count()) throw std::invalid_argument("lp_norm: size mismatch");
  detail::check_finite(grid, f, "lp_norm");
  const double s = par::sum_terms(f.size(), [&](std::size_t i) {
    return std::pow(std::abs(f[i]), p) * grid.cell_volume(i);
  });
  return std::pow(s, 1.0 / p);
}

inline double lp_norm(const DensityField& u, double p) { return lp_norm(u.grid, u.values, p); }
inline double lp_norm(const ChemField& v, double p) { return lp_norm(v.grid, v.values, p); }

inline double second_moment(const DensityField& u) {
  return par::sum_terms(u.values.size(), [&](std::size_t i) {
    return u.grid.radius_sq(i) * u.values[i] * u.grid.cell_volume(i);
  });
}

// Boltzmann entropy sum u ln u with the 0 ln 0 = 0 convention.
inline double boltzmann_entropy(const DensityField& u) {
  return par::sum_terms(u.values.size(), [&](std::size_t i) {
    const double ui = u.values[i];
    return ui > 0 ? ui * std::log(ui) * u.grid.cell_volume(i) : 0.0;
  });
}

inline void assert_nonnegative(const DensityField& u, const char* where) {
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    if (u.values[i] < 0)
      throw std::domain_error(std::string(where) + ": negative density at cell " +
                              std::to_string(i));
  }
}

inline void assert_unit_mass(const DensityField& u, const char* where, double tol = kMassTol) {
  const double mass = total_mass(u);
  if (std::abs(mass - 1.0) > tol)
    throw std::domain_error(std::string(where) + ": mass " + std::to_string(mass) +
                            " deviates from 1 beyond " + std::to_string(tol));
}

// One-shot setup renormalization (scenario construction only); returns the
// mass that was discretized before rescaling.
inline double normalize_mass(DensityField& u) {
  const double mass = total_mass(u);
  if (!(mass > 0)) throw std::domain_error("normalize_mass: non-positive mass");
  par::for_each(u.values.size(), [&](std::size_t i) { u.values[i] /= mass; });
  return mass;
}

inline DensityField make_density(const GridSpec& grid,
                                 const std::function<double(std::array<double, 3>)>& fn) {
  DensityField u{grid, std::vector<double>(grid.cell_count())};
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    const double val = fn(grid.cell_center(i));
    u.values[i] = val > 0 ? val : 0.0;
  }
  return u;
}

inline ChemField make_chem(const GridSpec& grid,
                           const std::function<double(std::array<double, 3>)>& fn) {
  ChemField v{grid, std::vector<double>(grid.cell_count())};
  for (std::size_t i = 0; i < v.values.size(); ++i) v.values[i] = fn(grid.cell_center(i));
  return v;
}

inline DensityField gaussian_density(const GridSpec& grid, double sigma, double center_r = 0) {
  auto u = make_density(grid, [&](std::array<double, 3> x) {
    double rsq = 0;
    if (grid.mode == GridMode::radial) {
      const double dr = x[0] - center_r;
      rsq = dr * dr;
    } else {
      for (int a = 0; a < grid.dim; ++a) {
        const double dx = x[static_cast<std::size_t>(a)] - (a == 0 ? center_r : 0.0);
        rsq += dx * dx;
      }
    }
    return std::exp(-0.5 * rsq / (sigma * sigma));
  });
  normalize_mass(u);
  return u;
}

inline DensityField shell_density(const GridSpec& grid, double r0, double width) {
  auto u = make_density(grid, [&](std::array<double, 3> x) {
    double r = grid.mode == GridMode::radial
                   ? x[0]
                   : std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    const double d = (r - r0) / width;
    return std::exp(-0.5 * d * d);
  });
  normalize_mass(u);
  return u;
}

// Mass remaining in the outer 5% of the domain; reported as the truncation
// diagnostic instead of an asserted bound.
inline double boundary_tail_mass(const DensityField& u) {
  const double L = u.grid.half_width;
  const double edge = 0.95 * L;
  return par::sum_terms(u.values.size(), [&](std::size_t i) {
    double r = u.grid.mode == GridMode::radial ? u.grid.radius(i)
                                               : [&] {
                                                   const auto x = u.grid.cell_center(i);
                                                   double m = 0;
                                                   for (int a = 0; a < u.grid.dim; ++a)
                                                     m = std::max(m, std::abs(x[static_cast<std::size_t>(a)]));
                                                   return m;
                                                 }();
    return r >= edge ? u.values[i] * u.grid.cell_volume(i) : 0.0;
  });
}

}  // namespace ksflow
