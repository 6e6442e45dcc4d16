#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksflow/field.hpp"
#include "ksflow/grid.hpp"

namespace ksflow {

// c_d = Gamma(d/2) / (2 (d-2) pi^{d/2}), the Newtonian kernel constant.
double poisson_constant(int dim);

// Bessel (screened Poisson) kernel at radius r > 0 via the Laplace-transform
// integral, certified to ~1e-10 relative. alpha = 0 requires d >= 3.
double bessel_kernel_value(double alpha, double r, int dim);

// d = 3 closed forms, used as independent oracles.
double newtonian_kernel_d3(double r);
double yukawa_kernel_d3(double alpha, double r);

// Spherical mean of the kernel over a source sphere of radius s, evaluated at
// target radius r (closed form for d = 3, quadrature otherwise).
double shell_mean_kernel(double alpha, double r, double s, int dim);

// Mean of the kernel over the singular (origin-centred) cell.
double kernel_cell_average(double alpha, const GridSpec& grid);

// Tabulated kernel. Full box: per-offset values on the zero-padded (2N)^d
// lattice with the singular cell replaced by its analytic cell average.
// Radial: N x N shell-mean values, row = target radius, column = source shell
// (diagonal entries cell-averaged over the source shell).
struct KernelTable {
  GridSpec grid;
  double alpha = 0;
  bool lattice = false;  // true: Green function of the discrete operator
  std::vector<double> values;
};

KernelTable continuum_kernel_table(const GridSpec& grid, double alpha);

// Green function of the discrete no-flux-free (padded) FD operator, scaled to
// the continuum convolution convention so entries are comparable with
// continuum_kernel_table away from the singular cell. Full box only.
KernelTable lattice_kernel_table(const GridSpec& grid, double alpha);

// Tables cache to disk keyed by (mode, d, N, L, alpha, type); unset dir = off.
void set_kernel_cache_dir(std::optional<std::string> dir);
std::optional<std::string> kernel_cache_dir();

// S_alpha(u) = Y_alpha * u with free-space emulation: zero-padded FFT
// convolution on the box (factor 2 per axis), radial Green solve on [0, 2L]
// with a monopole far-field closure.
ChemField apply_bessel(const GridSpec& grid, std::span<const double> u, double alpha);
ChemField apply_bessel(const DensityField& u, double alpha);

// Relative L2 residual of -Lap S + alpha S - u over the physical cells,
// evaluated with the discrete operator on the enlarged domain.
double kernel_identity_residual(const GridSpec& grid, std::span<const double> u, double alpha);

// int u S_alpha(u) dx (the interaction integral).
double interaction_integral(const GridSpec& grid, std::span<const double> u, double alpha);

}  // namespace ksflow
