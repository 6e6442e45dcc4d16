#include "ksflow/jko.hpp"

#include <cmath>

#include "ksflow/elliptic.hpp"
#include "ksflow/par.hpp"
#include "ksflow/transport.hpp"

namespace ksflow {

ChemField v_step(const DensityField& u, const ChemField& v_prev, const ModelParams& p) {
  require_same_grid(u.grid, v_prev.grid, "v_step");
  const double kappa = p.tau / p.step;
  std::vector<double> rhs(u.values.size());
  par::for_each(rhs.size(), [&](std::size_t i) {
    rhs[i] = u.values[i] + kappa * v_prev.values[i];
  });
  return elliptic_solve(u.grid, rhs, p.alpha, kappa);
}

double v_step_residual(const DensityField& u, const ChemField& v_prev, const ChemField& v,
                       const ModelParams& p) {
  const double kappa = p.tau / p.step;
  std::vector<double> rhs(u.values.size());
  par::for_each(rhs.size(), [&](std::size_t i) {
    rhs[i] = u.values[i] + kappa * v_prev.values[i];
  });
  return noflux_residual(u.grid, p.alpha + kappa, v.values, rhs);
}

namespace {

bool quantile_path(const GridSpec& grid, const JkoOptions& opts) {
  return grid.mode == GridMode::radial && !opts.use_entropic;
}

// dual-norm estimate of the horizontal Euler-Lagrange defect over a battery of
// radial test functions, with the W2^2-scale slack the optimality system allows
double el_residual_u_radial(const DensityField& u_new, const DensityField& u_old,
                            const ChemField& v, const ModelParams& p, double w2_sq) {
  const GridSpec& g = u_new.grid;
  const std::size_t n = g.cell_count();
  const double h = g.spacing();
  const double m = p.m();

  std::vector<double> um(n);
  for (std::size_t i = 0; i < n; ++i) um[i] = std::pow(u_new.values[i], m);

  double worst = 0;
  for (double center : {0.0, 0.5, 1.0, 2.0, 3.0}) {
    for (double width : {0.5, 1.0}) {
      // xi(r) = exp(-(r-c)^2 / 2w^2), |xi|_{W^{2,inf}} from the closed forms
      auto xi = [&](double r) {
        const double d = (r - center) / width;
        return std::exp(-0.5 * d * d);
      };
      auto dxi = [&](double r) {
        const double d = (r - center) / width;
        return -d / width * std::exp(-0.5 * d * d);
      };
      const double norm_inf = 1.0;
      const double norm_d1 = std::exp(-0.5) / width;
      const double norm_d2 = 1.0 / (width * width);
      const double xi_norm = std::max({norm_inf, norm_d1, norm_d2});

      // int xi (u_new - u_old) dx + h * sum_faces dxi . (grad(u^m) - chi u grad v)
      double acc = par::sum_terms(n, [&](std::size_t i) {
        return xi(g.radius(i)) * (u_new.values[i] - u_old.values[i]) * g.cell_volume(i);
      });
      double flux = par::sum_terms(n - 1, [&](std::size_t f) {
        const double r_face = h * static_cast<double>(f + 1);
        const double grad_um = (um[f + 1] - um[f]) / h;
        const double grad_v = (v.values[f + 1] - v.values[f]) / h;
        const double u_face = 0.5 * (u_new.values[f] + u_new.values[f + 1]);
        return dxi(r_face) * (grad_um - p.chi * u_face * grad_v) * g.face_area(f + 1) * h;
      });
      acc += p.step * flux;
      const double allowed = xi_norm * 0.5 * w2_sq;
      const double violation = std::max(0.0, std::abs(acc) - allowed) / (p.step * xi_norm);
      worst = std::max(worst, violation);
    }
  }
  return worst;
}

}  // namespace

StepReport jko_step(JkoState& state, const ModelParams& p, const JkoOptions& opts) {
  p.validate();
  require_same_grid(state.u.grid, state.v.grid, "jko_step");
  StepReport rep;
  rep.energy_before = energy(state.u, state.v, p);

  const bool lagrangian = quantile_path(state.u.grid, opts);
  if (lagrangian && state.lag.masses.empty())
    state.lag = lagrangian_from_cells(state.u, opts.quantile.pieces_per_cell);
  const LagrangianState lag_base = state.lag;
  const DensityField u_base = state.u;
  const ChemField v_base = state.v;
  const double inv_2h = 1.0 / (2.0 * p.step);

  DensityField u_cur = state.u;
  ChemField v_cur = state.v;
  LagrangianState lag_cur = state.lag;
  double f_prev = rep.energy_before.total;
  double w2_sq = 0;
  int inner = 0;
  bool inner_converged = true;
  double clipped = 0;

  std::vector<double> warm_f = state.dual_f, warm_g = state.dual_g;

  int sweep = 0;
  for (; sweep < opts.max_sweeps; ++sweep) {
    if (lagrangian) {
      QuantileStepResult us = u_step_quantile(state.u.grid, lag_base, v_cur, p, opts.quantile,
                                              sweep > 0 ? &lag_cur.edges : nullptr);
      inner += us.iterations;
      inner_converged = inner_converged && us.converged;
      clipped = std::max(clipped, us.clipped_mass);
      u_cur = std::move(us.u);
      lag_cur = std::move(us.state);
      w2_sq = us.w2_sq;
    } else {
      ProxOptions po = opts.prox;
      po.warm_f = warm_f;
      po.warm_g = warm_g;
      ProxStepResult us = u_step_entropic(u_base, v_cur, p, po);
      inner += us.iterations;
      inner_converged = inner_converged && us.converged;
      clipped = std::max(clipped, us.clipped_mass);
      u_cur = std::move(us.u);
      warm_f = std::move(us.dual_f);
      warm_g = std::move(us.dual_g);
      SinkhornOptions so;
      so.epsilon = opts.prox.epsilon;
      w2_sq = w2_sinkhorn(u_cur, u_base, so).w2_squared;
    }
    v_cur = v_step(u_cur, v_base, p);

    std::vector<double> dv(v_cur.values.size());
    par::for_each(dv.size(), [&](std::size_t i) { dv[i] = v_cur.values[i] - v_base.values[i]; });
    const double v_inc_sq = l2_norm_sq(v_cur.grid, dv);
    const double f_new = inv_2h * (w2_sq / p.chi + p.tau * v_inc_sq) +
                         energy(u_cur, v_cur, p).total;
    if (f_prev - f_new <= opts.sweep_rel_tol * std::max(1.0, std::abs(f_new))) {
      f_prev = std::min(f_prev, f_new);
      ++sweep;
      break;
    }
    f_prev = f_new;
  }

  rep.sweeps = sweep;
  rep.inner_iterations = inner;
  rep.converged = inner_converged;
  rep.clipped_mass = clipped;
  rep.w2_sq_increment = w2_sq;
  std::vector<double> dv(v_cur.values.size());
  par::for_each(dv.size(), [&](std::size_t i) { dv[i] = v_cur.values[i] - v_base.values[i]; });
  rep.v_increment_sq = l2_norm_sq(v_cur.grid, dv);
  rep.energy_after = energy(u_cur, v_cur, p);
  rep.el_residual_v = v_step_residual(u_cur, v_base, v_cur, p);
  rep.entropy = boltzmann_entropy(u_cur);
  rep.mass_drift = total_mass(u_cur) - 1.0;
  if (opts.track_el_residual_u && quantile_path(state.u.grid, opts))
    rep.el_residual_u = el_residual_u_radial(u_cur, u_base, v_cur, p, w2_sq);
  else
    rep.el_residual_u = std::nan("");

  if (std::abs(rep.mass_drift) > kMassTol)
    throw TrajectoryError("jko_step: mass drift beyond 1e-10", rep);
  if (rep.clipped_mass > 1e-12)
    throw TrajectoryError("jko_step: clipped negative mass beyond 1e-12", rep);
  if (rep.energy_after.total > rep.energy_before.total + opts.energy_slack)
    throw TrajectoryError("jko_step: energy increased beyond tolerance", rep);

  state.u = std::move(u_cur);
  state.v = std::move(v_cur);
  state.dual_f = std::move(warm_f);
  state.dual_g = std::move(warm_g);
  if (lagrangian) state.lag = std::move(lag_cur);
  return rep;
}

RegularityReport regularity_diagnostic(const DensityField& u_in, const ChemField& v_in,
                                       const DensityField& u, const ChemField& v,
                                       const ModelParams& p, double s_max, int substeps,
                                       double c2) {
  RegularityReport rep;
  rep.s_max = s_max;
  rep.c2_used = c2;
  const GridSpec& g = u.grid;
  const std::size_t n = g.cell_count();
  const double m = p.m();
  const double ds = s_max / substeps;

  std::vector<double> U = u.values, V = v.values;
  const double h_u_min = boltzmann_entropy(u);
  const double h_in = boltzmann_entropy(u_in);
  double d_sum = 0;
  double entropy_prev = h_u_min;
  double d_prev = HUGE_VAL;
  for (int k = 0; k < substeps; ++k) {
    // backward-Euler heat flows: (1/ds - Lap) U = U_prev / ds, V with the alpha term
    {
      std::vector<double> rhs(n);
      par::for_each(n, [&](std::size_t i) { rhs[i] = U[i] / ds; });
      U = solve_noflux(g, 1.0 / ds, rhs);
      par::for_each(n, [&](std::size_t i) { rhs[i] = V[i] / ds; });
      V = solve_noflux(g, 1.0 / ds + p.alpha, rhs);
    }
    // D = (4/m chi) |grad U^{m/2}|^2 + |Lap V - alpha V + U|^2
    std::vector<double> umh(n);
    par::for_each(n, [&](std::size_t i) {
      umh[i] = std::pow(std::max(U[i], 0.0), 0.5 * m);
    });
    const double d_diff = (4.0 / (m * p.chi)) * grad_norm_sq(g, umh);
    const auto lap_v = apply_laplacian_noflux(g, V);
    const double d_chem = par::sum_terms(n, [&](std::size_t i) {
      const double r = lap_v[i] - p.alpha * V[i] + U[i];
      return r * r * g.cell_volume(i);
    });
    const double d_val = d_diff + d_chem;
    rep.dissipation_series.push_back(d_val);
    d_sum += d_val;
    if (d_val > d_prev * 1.01) rep.dissipation_monotone = false;
    d_prev = d_val;

    DensityField uf{g, U};
    const double h_now = boltzmann_entropy(uf);
    if (h_now > entropy_prev + 1e-12) rep.flow_entropy_monotone = false;
    if (h_now > h_in + 1e-12) rep.entropy_sign_ok = false;
    entropy_prev = h_now;
  }
  rep.avg_dissipation = d_sum / substeps;

  const double grad_v_in = grad_norm_sq(g, v_in.values);
  const double v_in_l2 = l2_norm_sq(g, v_in.values);
  const double grad_v_new = grad_norm_sq(g, v.values);
  const double v_new_l2 = l2_norm_sq(g, v.values);
  rep.a_h0 = (h_in - h_u_min) / (p.step * p.chi) +
             (p.tau / p.step) *
                 (grad_v_in + p.alpha * v_in_l2 - grad_v_new - p.alpha * v_new_l2);

  const double e_in = energy(u_in, v_in, p).total;
  const double e_pow = std::pow(std::max(e_in, 0.0), 1.0 / (m - 1.0));
  rep.measured_c2 =
      std::max(0.0, (rep.avg_dissipation - 2.0 * rep.a_h0)) / std::max(e_in + e_pow, 1e-300);
  if (c2 > 0) {
    rep.bound_rhs = 2.0 * rep.a_h0 + c2 * (e_in + e_pow);
    rep.within_bound = rep.avg_dissipation <= rep.bound_rhs;
  }
  return rep;
}

namespace {

DiagnosticsRow make_row(int step, double t, const JkoState& state, const StepReport& rep,
                        const ModelParams& p, double cum) {
  const GridSpec& g = state.u.grid;
  const std::size_t n = g.cell_count();
  const double m = p.m();
  DiagnosticsRow row;
  row.step = step;
  row.t = t;
  row.energy_total = rep.energy_after.total;
  row.energy_diffusion = rep.energy_after.diffusion_term;
  row.energy_interaction = rep.energy_after.interaction_term;
  row.energy_dirichlet = rep.energy_after.dirichlet_term;
  row.energy_mass = rep.energy_after.mass_term;
  row.lm_norm = lp_norm(state.u, m);
  row.grad_v_l2 = std::sqrt(grad_norm_sq(g, state.v.values));
  row.v_l2 = std::sqrt(l2_norm_sq(g, state.v.values));
  row.second_moment = second_moment(state.u);
  row.entropy = rep.entropy;
  row.w2_sq_inc = rep.w2_sq_increment;
  row.v_inc_sq = rep.v_increment_sq;
  row.el_res_v = rep.el_residual_v;
  row.el_res_u = rep.el_residual_u;
  row.max_density = par::max_terms(n, [&](std::size_t i) { return state.u.values[i]; });
  row.tail_mass = boundary_tail_mass(state.u);
  std::vector<double> umh(n);
  par::for_each(n, [&](std::size_t i) {
    umh[i] = std::pow(std::max(state.u.values[i], 0.0), 0.5 * m);
  });
  row.diss_diffusion = grad_norm_sq(g, umh);
  const auto lap_v = apply_laplacian_noflux(g, state.v.values);
  row.diss_chem = par::sum_terms(n, [&](std::size_t i) {
    const double r = lap_v[i] - p.alpha * state.v.values[i] + state.u.values[i];
    return r * r * g.cell_volume(i);
  });
  if (g.mode == GridMode::radial) {
    const double h = g.spacing();
    const double q = 2.0 * m / (2.0 * m - 1.0);
    std::vector<double> um(n);
    for (std::size_t i = 0; i < n; ++i) um[i] = std::pow(state.u.values[i], m);
    const double s = par::sum_terms(n - 1, [&](std::size_t f) {
      const double grad_um = (um[f + 1] - um[f]) / h;
      const double grad_v = (state.v.values[f + 1] - state.v.values[f]) / h;
      const double u_face = 0.5 * (state.u.values[f] + state.u.values[f + 1]);
      const double flux = grad_um - p.chi * u_face * grad_v;
      return std::pow(std::abs(flux), q) * g.face_area(f + 1) * h;
    });
    row.flux_norm = std::pow(s, 1.0 / q);
  } else {
    row.flux_norm = std::nan("");
  }
  row.cum_increment = cum;
  row.inner_iterations = rep.inner_iterations;
  return row;
}

}  // namespace

Trajectory run_trajectory(const DensityField& u0, const ChemField& v0, const ModelParams& p,
                          double t_final, int stride, const JkoOptions& opts,
                          const TrajectoryResume* resume) {
  p.validate();
  assert_unit_mass(u0, "run_trajectory");
  assert_nonnegative(u0, "run_trajectory");
  Trajectory traj;
  traj.params = p;
  const auto e0 = energy(u0, v0, p);
  traj.initial_energy = resume ? resume->initial_energy : e0.total;
  traj.cum_increment = resume ? resume->cum_increment : 0.0;
  const int start_step = resume ? resume->start_step : 0;

  // a-priori constants from the estimates the energy inequality provides; at
  // alpha = 0 the truncated Dirichlet term misses the Newtonian exterior tail,
  // which the minimal-extension energy restores
  if (p.c_hls > 0 && p.chi < p.chi_c()) {
    const double e0_eff =
        e0.total + (p.alpha == 0 ? exterior_tail_energy(v0) : 0.0);
    traj.c5_lm = std::pow(
        2.0 * p.chi * std::max(e0_eff, 0.0) / (p.c_hls * (p.chi_c() - p.chi)), 1.0 / p.m());
  }
  traj.c5_v = 2.0 * l2_norm_sq(v0.grid, v0.values) +
              4.0 * std::max(e0.total, 0.0) / p.tau;
  traj.c5_moment = 2.0 * second_moment(u0) + 4.0 * std::max(e0.total, 0.0) * p.chi;

  JkoState state{u0, v0, {}, {}, resume ? resume->lag : LagrangianState{}};
  const int n_steps = static_cast<int>(std::ceil(t_final / p.step - 1e-12));
  traj.snapshot_times.push_back(start_step * p.step);
  traj.snapshots.push_back(state);
  traj.snapshot_cum.push_back(traj.cum_increment);

  double c2_cal = 0;
  int reg_evals = 0;

  for (int n = start_step; n < n_steps; ++n) {
    const DensityField u_prev = state.u;
    const ChemField v_prev = state.v;
    StepReport rep;
    try {
      rep = jko_step(state, p, opts);
    } catch (const TrajectoryError& err) {
      traj.completed = false;
      traj.halt_reason = err.what();
      break;
    }
    rep.step_index = n;
    const double t = (n + 1) * p.step;
    traj.cum_increment += rep.w2_sq_increment / p.chi + p.tau * rep.v_increment_sq;
    traj.max_mass_drift = std::max(traj.max_mass_drift, std::abs(rep.mass_drift));
    traj.max_clipped_mass = std::max(traj.max_clipped_mass, rep.clipped_mass);

    auto row = make_row(n, t, state, rep, p, traj.cum_increment);
    traj.rows.push_back(row);

    if (traj.cum_increment > 2.0 * traj.initial_energy * p.step + (n + 1) * 1e-8) {
      traj.telescoping_ok = false;
      traj.completed = false;
      traj.halt_reason = "telescoping increment bound violated";
      break;
    }
    // grid tolerance: the estimated constant and the midpoint quadrature both
    // carry O(dr^2) uncertainty, visible only for near-extremal data
    if (traj.c5_lm > 0 && std::pow(row.lm_norm, p.m()) >
                              std::pow(traj.c5_lm, p.m()) * 1.02)
      traj.lm_bound_ok = false;

    if (opts.regularity_every > 0 && n % opts.regularity_every == 0) {
      const double s_max = opts.regularity_horizon_steps * p.step;
      auto reg = regularity_diagnostic(u_prev, v_prev, state.u, state.v, p, s_max,
                                       opts.regularity_substeps,
                                       reg_evals >= opts.calibration_steps ? c2_cal : 0.0);
      if (reg_evals < opts.calibration_steps) {
        c2_cal = std::max({c2_cal, 1.25 * reg.measured_c2, 1e-2});
        traj.c2_calibrated = c2_cal;
      } else if (!reg.within_bound) {
        traj.regularity_ok = false;
      }
      if (!reg.entropy_sign_ok) traj.entropy_sign_ok = false;
      ++reg_evals;
    }

    // concentration diagnostic: halt once the half-mass radius is unresolved
    if (state.u.grid.mode == GridMode::radial) {
      const auto q = radial_quantiles(state.u, 2);
      if (q[0] < 3.0 * state.u.grid.spacing() &&
          row.max_density > 100.0 / state.u.grid.cell_volume(0)) {
        traj.completed = false;
        traj.halt_reason = "concentration: half-mass radius under 3 cells";
        break;
      }
    }

    if (stride > 0 && ((n + 1) % stride == 0 || n + 1 == n_steps)) {
      traj.snapshot_times.push_back(t);
      traj.snapshots.push_back(state);
      traj.snapshot_cum.push_back(traj.cum_increment);
    }
    traj.steps = n + 1;
  }
  return traj;
}

ModulusReport time_modulus(const Trajectory& traj) {
  ModulusReport rep;
  const auto& snaps = traj.snapshots;
  if (snaps.size() < 2) return rep;
  const GridSpec& g = snaps.front().u.grid;
  const double h = traj.params.step;
  const double m = traj.params.m();

  auto dual_norm = [&](std::vector<double> w) {
    for (int k = 0; k < 3; ++k) w = solve_noflux(g, 1.0, w);
    return std::sqrt(l2_norm_sq(g, w));
  };

  for (std::size_t i = 0; i + 1 < snaps.size(); ++i) {
    for (std::size_t j = i + 1; j < snaps.size(); ++j) {
      const double s = traj.snapshot_times[i], t = traj.snapshot_times[j];
      std::vector<double> dv(g.cell_count()), du(g.cell_count());
      par::for_each(dv.size(), [&](std::size_t k) {
        dv[k] = snaps[j].v.values[k] - snaps[i].v.values[k];
        du[k] = snaps[j].u.values[k] - snaps[i].u.values[k];
      });
      const double ratio_v =
          std::sqrt(l2_norm_sq(g, dv)) / (std::sqrt(t - s) + std::sqrt(h));
      const double denom_u = std::pow(1.0 + t, (m + 1.0) / (2.0 * m)) *
                             std::pow(t - s + h, (m - 1.0) / (2.0 * m));
      const double ratio_u = dual_norm(du) / denom_u;
      rep.c7_v = std::max(rep.c7_v, ratio_v);
      rep.c7_u = std::max(rep.c7_u, ratio_u);
      ++rep.pairs;
    }
  }
  return rep;
}

}  // namespace ksflow
