#pragma once

#include <cmath>
#include <stdexcept>

namespace ksflow {

// Rescaled model parameters. m = 2 - 2/d is tied to the dimension; chi_c is
// derived from the shipped Hardy-Littlewood-Sobolev constant estimate.
struct ModelParams {
  int dim = 3;
  double chi = 1.0;
  double alpha = 1.0;
  double tau = 1.0;
  double step = 1e-3;  // JKO time step h
  double c_hls = 0.0;  // estimate or user override; required for chi_c

  double m() const { return 2.0 - 2.0 / dim; }

  double chi_c() const {
    if (!(c_hls > 0)) throw std::logic_error("ModelParams: c_hls not set");
    return 2.0 / ((m() - 1.0) * c_hls);
  }

  bool exploratory() const { return chi >= chi_c(); }

  void validate() const {
    if (dim < 3) throw std::invalid_argument("ModelParams: d >= 3 required (m in (1,2))");
    if (!(chi > 0)) throw std::invalid_argument("ModelParams: chi > 0 required");
    if (alpha < 0) throw std::invalid_argument("ModelParams: alpha >= 0 required");
    if (!(tau > 0)) throw std::invalid_argument("ModelParams: tau > 0 required");
    if (!(step > 0)) throw std::invalid_argument("ModelParams: h > 0 required");
  }
};

// Scale factors taking the physical system to the normalised one and back.
struct RescaleResult {
  double chi = 0;
  double alpha = 0;
  double scale_R = 0;
  double scale_X = 0;
  double scale_T = 0;
  double scale_Gamma = 0;
};

inline RescaleResult rescale_physical(double rho0_mass, double chi0, double D0, double beta0,
                                      double alpha0, double tau, int dim) {
  if (dim < 3) throw std::invalid_argument("rescale_physical: d >= 3 required");
  if (!(rho0_mass > 0)) throw std::invalid_argument("rescale_physical: mass > 0 required");
  if (!(chi0 > 0) || !(D0 > 0) || !(beta0 > 0))
    throw std::invalid_argument("rescale_physical: chi0, D0, beta0 > 0 required");
  if (alpha0 < 0 || tau < 0)
    throw std::invalid_argument("rescale_physical: alpha0, tau >= 0 required");
  const double mass_pow = std::pow(rho0_mass, 2.0 / dim);
  RescaleResult r;
  r.chi = (chi0 / D0) * beta0 * mass_pow;
  r.alpha = alpha0 / std::pow(D0, double(dim) / (dim - 2)) * mass_pow;
  r.scale_R = std::pow(D0, double(dim) / (dim - 2));
  r.scale_X = std::pow(D0, 1.0 / (dim - 2)) / std::pow(rho0_mass, dim);
  r.scale_T = std::pow(D0, double(dim) / (dim - 2)) / mass_pow;
  r.scale_Gamma = beta0 * mass_pow;
  return r;
}

}  // namespace ksflow
