#pragma once

#include <span>
#include <vector>

#include "ksflow/field.hpp"
#include "ksflow/grid.hpp"

namespace ksflow {

// Canonical discrete Laplacian with no-flux closure on the physical domain
// (3-point stencil per axis; radial divergence form with shell face areas).
// The staggered-face Dirichlet form below is its exact summation-by-parts
// partner, which is what makes the discrete energy identities exact.
std::vector<double> apply_laplacian_noflux(const GridSpec& grid, std::span<const double> v);

// sum over interior faces of A_f ((v_+ - v_-)/h)^2 * h  ==  discrete |grad v|_2^2.
double grad_norm_sq(const GridSpec& grid, std::span<const double> v);

// Solves (zeta - Lap) w = rhs with the no-flux operator. zeta = kappa + alpha.
// zeta == 0 requires a zero-mean rhs (the mean-zero solution is returned).
std::vector<double> solve_noflux(const GridSpec& grid, double zeta, std::span<const double> rhs);

// Spec-facing wrapper: solves (kappa + alpha - Lap) w = rhs.
ChemField elliptic_solve(const GridSpec& grid, std::span<const double> rhs, double alpha,
                         double kappa);

// Residual of the no-flux operator: || (zeta - Lap) w - rhs ||_2 / max(||rhs||_2, tiny).
double noflux_residual(const GridSpec& grid, double zeta, std::span<const double> w,
                       std::span<const double> rhs);

// Radial tridiagonal solve on an arbitrary radial grid with either a no-flux
// outer face or a Dirichlet ghost cell beyond it (free-space closure).
enum class RadialOuterBC { no_flux, dirichlet_ghost };
std::vector<double> solve_radial(const GridSpec& grid, double zeta, std::span<const double> rhs,
                                 RadialOuterBC bc, double ghost_value);

// Centered-difference gradient magnitude per cell (one-sided at the boundary);
// diagnostic use only (CFL checks, flux reports).
std::vector<double> gradient_magnitude(const GridSpec& grid, std::span<const double> v);

}  // namespace ksflow
