#include "ksflow/sinkhorn_prox.hpp"

#include <cmath>
#include <stdexcept>

#include "ksflow/detail/logsumexp.hpp"
#include "ksflow/par.hpp"
#include "ksflow/transport.hpp"

namespace ksflow {

namespace {

// KL-proximal map of the mass-form integrand
//   e(M) = M^m w^{1-m} / (chi (m-1)) - M v
// solves  eps (x - log z) + gamma e'(e^x) = 0  for x = log M  (phi monotone).
double prox_log_mass(double log_z, double w, double v, double m, double chi, double gamma,
                     double eps) {
  const double a = gamma * m * std::pow(w, 1.0 - m) / (chi * (m - 1.0));
  const double b = gamma * v;
  auto phi = [&](double x) { return eps * (x - log_z) + a * std::exp((m - 1.0) * x) - b; };
  auto dphi = [&](double x) { return eps + a * (m - 1.0) * std::exp((m - 1.0) * x); };
  double x = log_z;  // warm start at the pre-marginal
  // bracket
  double lo = x, hi = x;
  if (phi(x) > 0) {
    while (phi(lo) > 0 && x - lo < 700) lo -= 8;
  } else {
    while (phi(hi) < 0 && hi - x < 700) hi += 8;
  }
  for (int it = 0; it < 100; ++it) {
    const double f = phi(x);
    if (std::abs(f) < 1e-13 * (std::abs(eps * x) + std::abs(b) + 1.0)) break;
    if (f > 0)
      hi = x;
    else
      lo = x;
    double step = f / dphi(x);
    double xn = x - step;
    if (!(xn > lo) || !(xn < hi)) xn = 0.5 * (lo + hi);  // bisection safeguard
    if (std::abs(xn - x) < 1e-15 * std::max(1.0, std::abs(x))) {
      x = xn;
      break;
    }
    x = xn;
  }
  return x;
}

}  // namespace

ProxStepResult u_step_entropic(const DensityField& u_prev, const ChemField& v,
                               const ModelParams& p, const ProxOptions& opts) {
  require_same_grid(u_prev.grid, v.grid, "u_step_entropic");
  assert_unit_mass(u_prev, "u_step_entropic");
  const GridSpec& grid = u_prev.grid;
  const std::size_t n = grid.cell_count();
  const double eps = opts.epsilon > 0 ? opts.epsilon : default_sinkhorn_epsilon(grid);
  const double gamma = 2.0 * p.step * p.chi;  // objective scaled by 2 h chi
  const double m = p.m();

  std::vector<double> a(n), log_a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = u_prev.values[i] * grid.cell_volume(i);
    if (a[i] < 0) throw std::domain_error("u_step_entropic: negative density");
    log_a[i] = a[i] > 0 ? std::log(a[i]) : -HUGE_VAL;
  }

  const auto kernel = detail::LogKernel::for_grid(grid);
  std::vector<double> f = opts.warm_f, g = opts.warm_g;
  if (f.size() != n) f.assign(n, 0.0);
  if (g.size() != n) g.assign(n, 0.0);
  std::vector<double> t_of_g(n), log_z(n), log_mass(n), zeros(n, 0.0);

  ProxStepResult out;
  out.converged = false;
  out.epsilon = eps;

  double obj_prev = HUGE_VAL;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    // exact projection onto the fixed marginal: f = eps log a + T0(g)
    kernel.apply(g, zeros, eps, t_of_g);
    par::for_each(n, [&](std::size_t i) {
      f[i] = a[i] > 0 ? eps * log_a[i] + t_of_g[i] : -HUGE_VAL;
    });
    // pre-marginal of the free side: log z = LSE_i[(f_i - C_ij)/eps]
    kernel.apply(f, zeros, eps, log_z);
    par::for_each(n, [&](std::size_t j) { log_z[j] = -log_z[j] / eps; });
    // pointwise KL-prox in mass coordinates
    par::for_each(n, [&](std::size_t j) {
      log_mass[j] = prox_log_mass(log_z[j], grid.cell_volume(j), v.values[j], m, p.chi, gamma,
                                  eps);
      g[j] = eps * (log_mass[j] - log_z[j]);
    });

    // objective in mass coordinates (transport part via duals, energy exact)
    const double energy_part = par::sum_terms(n, [&](std::size_t j) {
      const double mass = std::exp(log_mass[j]);
      const double w = grid.cell_volume(j);
      return std::pow(mass, m) * std::pow(w, 1.0 - m) / (p.chi * (m - 1.0)) - mass * v.values[j];
    });
    const double fa = par::sum_terms(n, [&](std::size_t i) { return a[i] > 0 ? f[i] * a[i] : 0.0; });
    const double gm = par::sum_terms(n, [&](std::size_t j) {
      return g[j] * std::exp(log_mass[j]);
    });
    const double obj = (fa + gm) / gamma + energy_part;

    if (it > 2 && std::abs(obj_prev - obj) <= opts.f_rel_tol * std::max(1.0, std::abs(obj))) {
      // fixed-point residual on the constrained marginal
      kernel.apply(g, zeros, eps, t_of_g);
      const double res = par::sum_terms(n, [&](std::size_t i) {
        if (a[i] <= 0) return 0.0;
        const double fn = eps * log_a[i] + t_of_g[i];
        return a[i] * std::abs(std::exp((f[i] - fn) / eps) - 1.0);
      });
      if (res <= opts.marginal_tol) {
        out.converged = true;
        break;
      }
    }
    obj_prev = obj;
  }

  // final exact-marginal sweep, then read off the free marginal: total mass
  // equals the constrained side exactly
  kernel.apply(g, zeros, eps, t_of_g);
  par::for_each(n, [&](std::size_t i) {
    f[i] = a[i] > 0 ? eps * log_a[i] + t_of_g[i] : -HUGE_VAL;
  });
  kernel.apply(f, zeros, eps, log_z);
  std::vector<double> mass_out(n);
  par::for_each(n, [&](std::size_t j) { mass_out[j] = std::exp(g[j] / eps - log_z[j] / eps); });

  DensityField u{grid, std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) u.values[j] = mass_out[j] / grid.cell_volume(j);
  const double drift = total_mass(u) - 1.0;
  if (std::abs(drift) > kMassTol)
    throw std::logic_error("u_step_entropic: mass drift " + std::to_string(drift));
  const double scale = 1.0 / (1.0 + drift);
  for (auto& x : u.values) x *= scale;

  out.u = std::move(u);
  out.iterations = it + 1;
  out.objective = obj_prev;
  out.dual_f = std::move(f);
  out.dual_g = std::move(g);
  out.clipped_mass = 0;
  return out;
}

}  // namespace ksflow
