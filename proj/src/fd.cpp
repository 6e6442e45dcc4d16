#include "ksflow/fd.hpp"

#include <cmath>
#include <stdexcept>

#include "ksflow/elliptic.hpp"
#include "ksflow/par.hpp"

namespace ksflow {

namespace {

inline double minmod(double a, double b) {
  if (a * b <= 0) return 0;
  return std::abs(a) < std::abs(b) ? a : b;
}

// symmetric positive tridiagonal solve of  (w_i/dt) u_i - div(D grad u) = rhs_i
// with no-flux closure; coef[f] = D_f A_f / h at interior faces
std::vector<double> implicit_diffusion_radial(const GridSpec& g, double dt,
                                              const std::vector<double>& coef,
                                              std::span<const double> u_star) {
  const std::size_t n = g.cell_count();
  std::vector<double> diag(n), b(n), cp(n), dp(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = g.cell_volume(i);
    double d = w / dt;
    if (i > 0) d += coef[i];
    if (i + 1 < n) d += coef[i + 1];
    diag[i] = d;
    b[i] = w * u_star[i] / dt;
  }
  cp[0] = (n > 1 ? -coef[1] : 0.0) / diag[0];
  dp[0] = b[0] / diag[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double lower = -coef[i];
    const double m = diag[i] - lower * cp[i - 1];
    cp[i] = i + 1 < n ? -coef[i + 1] / m : 0.0;
    dp[i] = (b[i] - lower * dp[i - 1]) / m;
  }
  out[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) out[i] = dp[i] - cp[i] * out[i + 1];
  return out;
}

void fd_step_radial(FdState& state, const FdConfig& config, const ModelParams& p) {
  const GridSpec& g = state.u.grid;
  const std::size_t n = g.cell_count();
  const double h = g.spacing();
  const double dt = config.dt;
  const double m = p.m();
  auto& u = state.u.values;
  const auto& v = state.v.values;

  // explicit upwind drift: flux chi * u_face * dv/dr at interior faces
  std::vector<double> flux(n + 1, 0.0);
  par::for_each(n - 1, [&](std::size_t f) {
    const std::size_t i = f;  // face f+1 sits between cells i and i+1
    const double grad_v = (v[i + 1] - v[i]) / h;
    double u_face;
    if (grad_v > 0) {
      u_face = u[i];
      if (config.flux_limiter && i > 0)
        u_face += 0.5 * minmod(u[i + 1] - u[i], u[i] - u[i - 1]);
    } else {
      u_face = u[i + 1];
      if (config.flux_limiter && i + 2 < n)
        u_face -= 0.5 * minmod(u[i + 2] - u[i + 1], u[i + 1] - u[i]);
    }
    flux[i + 1] = p.chi * std::max(u_face, 0.0) * grad_v;
  });
  std::vector<double> u_star(n);
  par::for_each(n, [&](std::size_t i) {
    const double div = (g.face_area(i + 1) * flux[i + 1] - g.face_area(i) * flux[i]) /
                       g.cell_volume(i);
    u_star[i] = u[i] - dt * div;
  });

  // implicit nonlinear diffusion, coefficient lagged at u_star
  std::vector<double> coef(n + 1, 0.0);
  par::for_each(n - 1, [&](std::size_t f) {
    const double u_face = 0.5 * (std::max(u_star[f], 0.0) + std::max(u_star[f + 1], 0.0));
    coef[f + 1] = m * std::pow(u_face, m - 1.0) * g.face_area(f + 1) / h;
  });
  auto u_new = implicit_diffusion_radial(g, dt, coef, u_star);

  double clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (u_new[i] < -1e-12)
      throw std::runtime_error(
          "fd_step: negativity beyond -1e-12; reduce dt (drift CFL violated)");
    if (u_new[i] < 0) {
      clipped += -u_new[i] * g.cell_volume(i);
      u_new[i] = 0;
    }
  }
  if (clipped > 1e-12) throw std::runtime_error("fd_step: clipped mass beyond 1e-12");

  state.u.values = std::move(u_new);
  state.v = elliptic_solve(g, [&] {
    std::vector<double> rhs(n);
    const double kappa = p.tau / dt;
    for (std::size_t i = 0; i < n; ++i) rhs[i] = state.u.values[i] + kappa * v[i];
    return rhs;
  }(), p.alpha, p.tau / dt);
  state.t += dt;
}

// dimension-split variant on the box: upwind drift then one implicit sweep per axis
void fd_step_box(FdState& state, const FdConfig& config, const ModelParams& p) {
  const GridSpec& g = state.u.grid;
  const int N = g.points;
  const double h = g.spacing();
  const double dt = config.dt;
  const double m = p.m();
  const std::size_t n = g.cell_count();
  auto& u = state.u.values;
  const auto& v = state.v.values;

  std::vector<double> u_star = u;
  for (int ax = 0; ax < g.dim; ++ax) {
    std::size_t stride = 1;
    for (int a = g.dim - 1; a > ax; --a) stride *= static_cast<std::size_t>(N);
    const std::size_t lines = n / static_cast<std::size_t>(N);
    std::vector<double> upd(n, 0.0);
    par::for_each(lines, [&](std::size_t l) {
      const std::size_t o = l / stride, r = l % stride;
      const std::size_t base = o * static_cast<std::size_t>(N) * stride + r;
      for (int i = 0; i + 1 < N; ++i) {
        const std::size_t c = base + static_cast<std::size_t>(i) * stride;
        const double grad_v = (v[c + stride] - v[c]) / h;
        const double u_face = grad_v > 0 ? u[c] : u[c + stride];
        const double f = p.chi * std::max(u_face, 0.0) * grad_v;
        upd[c] -= dt * f / h;
        upd[c + stride] += dt * f / h;
      }
    });
    par::for_each(n, [&](std::size_t i) { u_star[i] += upd[i]; });
  }

  // per-axis implicit diffusion sweeps with the lagged coefficient
  std::vector<double> cur = u_star;
  for (int ax = 0; ax < g.dim; ++ax) {
    std::size_t stride = 1;
    for (int a = g.dim - 1; a > ax; --a) stride *= static_cast<std::size_t>(N);
    const std::size_t lines = n / static_cast<std::size_t>(N);
    std::vector<double> next(n);
    const double dt_split = dt;  // backward Euler per axis (Douglas splitting)
    par::for_each(lines, [&](std::size_t l) {
      const std::size_t o = l / stride, r = l % stride;
      const std::size_t base = o * static_cast<std::size_t>(N) * stride + r;
      std::vector<double> diag(static_cast<std::size_t>(N)), b(static_cast<std::size_t>(N)),
          cp(static_cast<std::size_t>(N)), dp(static_cast<std::size_t>(N)),
          coef(static_cast<std::size_t>(N) + 1, 0.0);
      for (int f = 0; f + 1 < N; ++f) {
        const double ua = std::max(cur[base + static_cast<std::size_t>(f) * stride], 0.0);
        const double ub = std::max(cur[base + static_cast<std::size_t>(f + 1) * stride], 0.0);
        coef[static_cast<std::size_t>(f) + 1] =
            m * std::pow(0.5 * (ua + ub), m - 1.0) / (h * h);
      }
      for (int i = 0; i < N; ++i) {
        double d = 1.0 / dt_split;
        if (i > 0) d += coef[static_cast<std::size_t>(i)];
        if (i + 1 < N) d += coef[static_cast<std::size_t>(i) + 1];
        diag[static_cast<std::size_t>(i)] = d;
        b[static_cast<std::size_t>(i)] =
            cur[base + static_cast<std::size_t>(i) * stride] / dt_split;
      }
      cp[0] = -coef[1] / diag[0];
      dp[0] = b[0] / diag[0];
      for (int i = 1; i < N; ++i) {
        const double lower = -coef[static_cast<std::size_t>(i)];
        const double mm = diag[static_cast<std::size_t>(i)] - lower * cp[static_cast<std::size_t>(i) - 1];
        cp[static_cast<std::size_t>(i)] =
            i + 1 < N ? -coef[static_cast<std::size_t>(i) + 1] / mm : 0.0;
        dp[static_cast<std::size_t>(i)] =
            (b[static_cast<std::size_t>(i)] - lower * dp[static_cast<std::size_t>(i) - 1]) / mm;
      }
      double prev = dp[static_cast<std::size_t>(N) - 1];
      next[base + static_cast<std::size_t>(N - 1) * stride] = prev;
      for (int i = N - 2; i >= 0; --i) {
        prev = dp[static_cast<std::size_t>(i)] - cp[static_cast<std::size_t>(i)] * prev;
        next[base + static_cast<std::size_t>(i) * stride] = prev;
      }
    });
    cur.swap(next);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (cur[i] < -1e-12)
      throw std::runtime_error(
          "fd_step: negativity beyond -1e-12; reduce dt (drift CFL violated)");
    if (cur[i] < 0) cur[i] = 0;
  }
  state.u.values = std::move(cur);
  std::vector<double> rhs(n);
  const double kappa = p.tau / dt;
  for (std::size_t i = 0; i < n; ++i) rhs[i] = state.u.values[i] + kappa * v[i];
  state.v = elliptic_solve(g, rhs, p.alpha, kappa);
  state.t += dt;
}

}  // namespace

double fd_cfl_bound(const FdState& state, const FdConfig& config, const ModelParams& p) {
  const auto grad = gradient_magnitude(state.v.grid, state.v.values);
  const double gmax = par::max_abs(grad);
  const double h = state.u.grid.spacing();
  return config.cfl_safety * h / std::max(p.chi * gmax, 1e-12);
}

void fd_step(FdState& state, const FdConfig& config, const ModelParams& p) {
  require_same_grid(state.u.grid, state.v.grid, "fd_step");
  if (state.u.grid.mode == GridMode::radial)
    fd_step_radial(state, config, p);
  else
    fd_step_box(state, config, p);
}

FdTrajectory run_fd(const DensityField& u0, const ChemField& v0, const ModelParams& p,
                    const FdConfig& config, int stride) {
  FdTrajectory traj;
  traj.params = p;
  traj.config = config;
  FdState state{u0, v0, 0.0};
  if (config.dt > fd_cfl_bound(state, config, p))
    throw std::invalid_argument("run_fd: dt exceeds the drift CFL bound at t = 0");

  const double mass0 = total_mass(state.u);
  double e_prev = energy(state.u, state.v, p).total;
  const int n_steps = static_cast<int>(std::ceil(config.t_final / config.dt - 1e-12));
  traj.snapshot_times.push_back(0.0);
  traj.snapshots.push_back(state);
  for (int n = 0; n < n_steps; ++n) {
    try {
      fd_step(state, config, p);
    } catch (const std::exception& err) {
      traj.completed = false;
      traj.halt_reason = err.what();
      break;
    }
    traj.max_mass_drift =
        std::max(traj.max_mass_drift, std::abs(total_mass(state.u) - mass0));
    const auto e = energy(state.u, state.v, p);
    traj.max_energy_increase = std::max(traj.max_energy_increase, e.total - e_prev);
    e_prev = e.total;

    DiagnosticsRow row;
    row.step = n;
    row.t = state.t;
    row.energy_total = e.total;
    row.energy_diffusion = e.diffusion_term;
    row.energy_interaction = e.interaction_term;
    row.energy_dirichlet = e.dirichlet_term;
    row.energy_mass = e.mass_term;
    row.lm_norm = lp_norm(state.u, p.m());
    row.grad_v_l2 = std::sqrt(grad_norm_sq(state.v.grid, state.v.values));
    row.v_l2 = std::sqrt(l2_norm_sq(state.v.grid, state.v.values));
    row.second_moment = second_moment(state.u);
    row.entropy = boltzmann_entropy(state.u);
    row.max_density = par::max_terms(state.u.values.size(),
                                     [&](std::size_t i) { return state.u.values[i]; });
    row.tail_mass = boundary_tail_mass(state.u);
    traj.rows.push_back(row);

    if (stride > 0 && ((n + 1) % stride == 0 || n + 1 == n_steps)) {
      traj.snapshot_times.push_back(state.t);
      traj.snapshots.push_back(state);
    }
  }
  return traj;
}

CompareReport compare_trajectories(const Trajectory& jko, const FdTrajectory& fd,
                                   const ModelParams& p) {
  CompareReport rep;
  rep.caveat =
      "jko minimiser selection is not unique; agreement is evidence, not proof";
  const double time_tol = 0.5 * std::min(p.step, fd.config.dt);
  for (std::size_t i = 0; i < jko.snapshot_times.size(); ++i) {
    for (std::size_t j = 0; j < fd.snapshot_times.size(); ++j) {
      if (std::abs(jko.snapshot_times[i] - fd.snapshot_times[j]) > time_tol) continue;
      const auto& a = jko.snapshots[i];
      const auto& b = fd.snapshots[j];
      require_same_grid(a.u.grid, b.u.grid, "compare_trajectories");
      const GridSpec& g = a.u.grid;
      const double m = p.m();
      std::vector<double> du(g.cell_count()), dv(g.cell_count());
      par::for_each(du.size(), [&](std::size_t k) {
        du[k] = a.u.values[k] - b.u.values[k];
        dv[k] = a.v.values[k] - b.v.values[k];
      });
      CompareRow row;
      row.t = jko.snapshot_times[i];
      row.lm_gap_rel = lp_norm(g, du, m) / std::max(lp_norm(a.u, m), 1e-300);
      // weighted H1 gap with the decay weight 1/sqrt(1+|x|^2)
      auto weighted_h1 = [&](std::span<const double> w) {
        const auto grad = gradient_magnitude(g, w);
        return par::sum_terms(w.size(), [&](std::size_t k) {
          const double rho = 1.0 / std::sqrt(1.0 + g.radius_sq(k));
          return rho * (w[k] * w[k] + grad[k] * grad[k]) * g.cell_volume(k);
        });
      };
      row.v_gap_rel =
          std::sqrt(weighted_h1(dv)) / std::max(std::sqrt(weighted_h1(a.v.values)), 1e-300);
      auto energy_at = [&](const std::vector<DiagnosticsRow>& rows, double t,
                           double fallback) {
        for (const auto& r : rows)
          if (std::abs(r.t - t) <= time_tol) return r.energy_total;
        return fallback;
      };
      row.energy_jko = energy_at(jko.rows, row.t, jko.initial_energy);
      row.energy_fd = energy_at(fd.rows, row.t, row.energy_jko);
      rep.rows.push_back(row);
      rep.max_lm_gap = std::max(rep.max_lm_gap, row.lm_gap_rel);
      rep.final_lm_gap = row.lm_gap_rel;
    }
  }
  return rep;
}

}  // namespace ksflow
