#include "ksflow/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "json.hpp"
#include "ksflow/bessel.hpp"
#include "ksflow/elliptic.hpp"
#include "ksflow/field_io.hpp"
#include "ksflow/par.hpp"
#include "ksflow/quantile_step.hpp"
#include "ksflow/sinkhorn_prox.hpp"
#include "ksflow/transport.hpp"

namespace fsys = std::filesystem;

namespace ksflow {

namespace {

constexpr const char* kCsvHeader =
    "scenario_hash,solver,step,t,energy_total,energy_diffusion,energy_interaction,"
    "energy_dirichlet,energy_mass,lm_norm,grad_v_l2,v_l2,second_moment,entropy,w2_sq_inc,"
    "v_inc_sq,el_res_v,el_res_u,max_density,tail_mass,diss_diffusion,diss_chem,flux_norm,"
    "cum_increment,inner_iterations";

void append_rows(std::ostream& out, const std::string& solver, std::uint64_t hash,
                 const std::vector<DiagnosticsRow>& rows) {
  for (const auto& r : rows) {
    out << hash << ',' << solver << ',' << r.step << ',' << format_double(r.t) << ','
        << format_double(r.energy_total) << ',' << format_double(r.energy_diffusion) << ','
        << format_double(r.energy_interaction) << ',' << format_double(r.energy_dirichlet)
        << ',' << format_double(r.energy_mass) << ',' << format_double(r.lm_norm) << ','
        << format_double(r.grad_v_l2) << ',' << format_double(r.v_l2) << ','
        << format_double(r.second_moment) << ',' << format_double(r.entropy) << ','
        << format_double(r.w2_sq_inc) << ',' << format_double(r.v_inc_sq) << ','
        << format_double(r.el_res_v) << ',' << format_double(r.el_res_u) << ','
        << format_double(r.max_density) << ',' << format_double(r.tail_mass) << ','
        << format_double(r.diss_diffusion) << ',' << format_double(r.diss_chem) << ','
        << format_double(r.flux_norm) << ',' << format_double(r.cum_increment) << ','
        << r.inner_iterations << '\n';
  }
}

void write_checkpoint(const std::string& dir, int step, double t, const Scenario& s,
                      const JkoState& state, double cum_increment, double initial_energy) {
  std::ostringstream name;
  name << "ckpt_" << std::setw(6) << std::setfill('0') << step;
  const auto prefix = (fsys::path(dir) / name.str()).string();
  write_field_blob(prefix + "_u.kfld", state.u.grid, state.u.values);
  write_field_blob(prefix + "_v.kfld", state.v.grid, state.v.values);
  if (!state.dual_f.empty()) {
    write_field_blob(prefix + "_dualf.kfld", state.u.grid, state.dual_f);
    write_field_blob(prefix + "_dualg.kfld", state.u.grid, state.dual_g);
  }
  nlohmann::json j;
  j["step"] = step;
  j["t"] = t;
  j["cum_increment"] = cum_increment;
  j["initial_energy"] = initial_energy;
  j["scenario_hash"] = scenario_hash(s);
  j["source"] = s.source_text;
  if (!state.lag.masses.empty()) {
    j["lag_edges"] = state.lag.edges;
    j["lag_masses"] = state.lag.masses;
  }
  std::ofstream f(prefix + ".json");
  f << j.dump(2);
}

JkoOptions jko_options_from(const Scenario& s) {
  JkoOptions opts;
  opts.use_entropic = s.jko_entropic;
  opts.prox.epsilon = s.ot_epsilon;
  opts.energy_slack = s.energy_slack;
  opts.regularity_every = s.regularity_every;
  // entropic steps carry an O(eps) self-cost drift in the surrogate metric;
  // widen the default per-step allowance accordingly
  const bool entropic = s.jko_entropic || s.grid.mode == GridMode::full_box;
  if (entropic && opts.energy_slack <= 1e-8) opts.energy_slack = 1e-3;
  return opts;
}

double final_v_gap(const JkoState& state, const ModelParams& p) {
  const GridSpec& g = state.u.grid;
  std::vector<double> target;
  if (p.alpha > 0) {
    target = apply_bessel(state.u, p.alpha).values;
  } else {
    // the quasi-steady state of the truncated no-flux domain: the box
    // potential of u minus its volume mean (the constant mode is pumped
    // forever and escapes to infinity on the whole space)
    double vol = 0;
    for (std::size_t i = 0; i < g.cell_count(); ++i) vol += g.cell_volume(i);
    const double mean_u = total_mass(state.u) / vol;
    std::vector<double> rhs(g.cell_count());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = state.u.values[i] - mean_u;
    target = solve_noflux(g, 0.0, rhs);
  }
  std::vector<double> diff(g.cell_count());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = state.v.values[i] - target[i];
  if (p.alpha == 0) {
    double mean = 0, vol = 0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
      mean += diff[i] * g.cell_volume(i);
      vol += g.cell_volume(i);
    }
    mean /= vol;
    for (auto& d : diff) d -= mean;
  }
  const double denom = std::sqrt(l2_norm_sq(g, state.v.values));
  return denom > 0 ? std::sqrt(l2_norm_sq(g, diff)) / denom : 0.0;
}

RunSummary summarise_jko(const Scenario& s, const ModelParams& p, const Trajectory& traj,
                         const std::string& out_dir) {
  RunSummary sum;
  sum.out_dir = out_dir;
  sum.hash = scenario_hash(s);
  sum.resolved_chi = p.chi;
  sum.resolved_c_hls = p.c_hls;
  sum.exploratory = p.exploratory();
  sum.halt_reason = traj.halt_reason;
  sum.final_energy = traj.rows.empty() ? traj.initial_energy : traj.rows.back().energy_total;
  for (const auto& r : traj.rows)
    sum.sup_lm_pow_m = std::max(sum.sup_lm_pow_m, std::pow(r.lm_norm, p.m()));
  if (!sum.exploratory && traj.c5_lm > 0) sum.lm_bound = std::pow(traj.c5_lm, p.m());
  if (!traj.snapshots.empty()) sum.final_v_gap = final_v_gap(traj.snapshots.back(), p);

  sum.checks["completed"] = traj.completed;
  sum.checks["telescoping"] = traj.telescoping_ok;
  sum.checks["lm_bound"] = sum.exploratory || traj.lm_bound_ok;
  sum.checks["regularity"] = traj.regularity_ok;
  bool el_ok = true, mono_ok = true;
  double prev = traj.initial_energy;
  for (const auto& r : traj.rows) {
    el_ok = el_ok && r.el_res_v <= 1e-10;
    mono_ok = mono_ok && r.energy_total <= prev + s.energy_slack;
    prev = r.energy_total;
  }
  sum.checks["el_residual_v"] = el_ok;
  sum.checks["energy_monotone"] = mono_ok;

  bool all = true;
  for (const auto& [k, v] : sum.checks) all = all && v;
  if (!traj.completed && traj.halt_reason.find("concentration") != std::string::npos)
    sum.exit_code = kExitNonConvergence;
  else if (!all)
    sum.exit_code = kExitInvariantBreach;
  return sum;
}

void write_summary_json(const RunSummary& sum, const Scenario& s, const std::string& out_dir) {
  nlohmann::json j;
  j["exit_code"] = sum.exit_code;
  j["exploratory"] = sum.exploratory;
  j["halt_reason"] = sum.halt_reason;
  j["scenario_hash"] = sum.hash;
  j["chi"] = sum.resolved_chi;
  j["c_hls"] = sum.resolved_c_hls;
  j["sup_lm_pow_m"] = sum.sup_lm_pow_m;
  j["lm_bound"] = sum.lm_bound;
  j["final_energy"] = sum.final_energy;
  j["final_v_gap"] = sum.final_v_gap;
  j["init_raw_mass"] = sum.init_raw_mass;
  j["seed"] = s.seed;
  for (const auto& [k, v] : sum.checks) j["checks"][k] = v;
  std::ofstream f(fsys::path(out_dir) / "summary.json");
  f << j.dump(2);
}

RunSummary run_jko(const Scenario& s, const ModelParams& p, const std::string& out_dir,
                   const DensityField& u0, const ChemField& v0,
                   const TrajectoryResume* resume = nullptr) {
  const auto opts = jko_options_from(s);
  const auto traj = run_trajectory(u0, v0, p, s.t_final, s.stride, opts, resume);
  auto sum = summarise_jko(s, p, traj, out_dir);

  std::ofstream csv(fsys::path(out_dir) / "diagnostics.csv");
  csv << kCsvHeader << '\n';
  append_rows(csv, "jko", sum.hash, traj.rows);

  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    const int step = static_cast<int>(std::lround(traj.snapshot_times[i] / p.step));
    write_checkpoint(out_dir, step, traj.snapshot_times[i], s, traj.snapshots[i],
                     traj.snapshot_cum[i], traj.initial_energy);
  }
  write_summary_json(sum, s, out_dir);
  return sum;
}

RunSummary run_fd_scenario(const Scenario& s, const ModelParams& p, const std::string& out_dir,
                           const DensityField& u0, const ChemField& v0) {
  FdConfig cfg;
  cfg.dt = s.fd_dt;
  cfg.t_final = s.t_final;
  RunSummary sum;
  sum.out_dir = out_dir;
  sum.hash = scenario_hash(s);
  sum.resolved_chi = p.chi;
  sum.resolved_c_hls = p.c_hls;
  sum.exploratory = p.exploratory();
  try {
    const auto traj = run_fd(u0, v0, p, cfg, s.stride);
    sum.checks["completed"] = traj.completed;
    sum.checks["mass"] = traj.max_mass_drift <= 1e-12;
    sum.halt_reason = traj.halt_reason;
    sum.final_energy = traj.rows.empty() ? 0.0 : traj.rows.back().energy_total;
    for (const auto& r : traj.rows)
      sum.sup_lm_pow_m = std::max(sum.sup_lm_pow_m, std::pow(r.lm_norm, p.m()));
    std::ofstream csv(fsys::path(out_dir) / "diagnostics.csv");
    csv << kCsvHeader << '\n';
    append_rows(csv, "fd", sum.hash, traj.rows);
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
      const int step = static_cast<int>(std::lround(traj.snapshot_times[i] / cfg.dt));
      JkoState view{traj.snapshots[i].u, traj.snapshots[i].v, {}, {}, {}};
      write_checkpoint(out_dir, step, traj.snapshot_times[i], s, view, 0.0, 0.0);
    }
    if (!(traj.completed && sum.checks["mass"])) sum.exit_code = kExitInvariantBreach;
  } catch (const std::invalid_argument& e) {
    sum.exit_code = kExitConfigError;
    sum.halt_reason = e.what();
  }
  write_summary_json(sum, s, out_dir);
  return sum;
}

}  // namespace

void write_diagnostics_csv(const std::string& path, const std::string& solver,
                           std::uint64_t hash, const std::vector<DiagnosticsRow>& rows) {
  std::ofstream csv(path);
  csv << kCsvHeader << '\n';
  append_rows(csv, solver, hash, rows);
}

RunSummary run_scenario(const Scenario& s, const std::string& out_dir) {
  fsys::create_directories(out_dir);
  RunSummary sum;
  try {
    double c_hls = 0;
    const auto p = resolve_params(s, &c_hls);
    {
      std::ofstream echo(fsys::path(out_dir) / "config_echo.json");
      echo << scenario_to_json(s, p.chi, c_hls);
    }
    double raw_mass = 0;
    const auto u0 = build_initial_density(s, &raw_mass);
    const auto v0 = build_initial_chem(s, u0);
    RunSummary result;
    if (s.solver == SolverKind::fd)
      result = run_fd_scenario(s, p, out_dir, u0, v0);
    else if (s.solver == SolverKind::both)
      return run_compare(s, out_dir);
    else
      result = run_jko(s, p, out_dir, u0, v0);
    result.init_raw_mass = raw_mass;
    write_summary_json(result, s, out_dir);
    return result;
  } catch (const std::invalid_argument& e) {
    sum.exit_code = kExitConfigError;
    sum.halt_reason = e.what();
    sum.out_dir = out_dir;
    return sum;
  }
}

RunSummary resume_run(const std::string& ckpt_prefix, const std::string& out_dir) {
  fsys::create_directories(out_dir);
  std::ifstream jf(ckpt_prefix + ".json");
  if (!jf) {
    RunSummary sum;
    sum.exit_code = kExitConfigError;
    sum.halt_reason = "cannot open checkpoint " + ckpt_prefix + ".json";
    return sum;
  }
  nlohmann::json j;
  jf >> j;
  const auto s = parse_scenario(j.at("source").get<std::string>());
  double c_hls = 0;
  const auto p = resolve_params(s, &c_hls);
  auto u_blob = read_field_blob(ckpt_prefix + "_u.kfld");
  auto v_blob = read_field_blob(ckpt_prefix + "_v.kfld");
  DensityField u0{u_blob.grid, std::move(u_blob.values)};
  ChemField v0{v_blob.grid, std::move(v_blob.values)};
  TrajectoryResume resume;
  resume.start_step = j.at("step").get<int>();
  resume.cum_increment = j.at("cum_increment").get<double>();
  resume.initial_energy = j.at("initial_energy").get<double>();
  if (j.contains("lag_edges")) {
    resume.lag.edges = j.at("lag_edges").get<std::vector<double>>();
    resume.lag.masses = j.at("lag_masses").get<std::vector<double>>();
  }
  {
    std::ofstream echo(fsys::path(out_dir) / "config_echo.json");
    echo << scenario_to_json(s, p.chi, c_hls);
  }
  return run_jko(s, p, out_dir, u0, v0, &resume);
}

RunSummary run_compare(const Scenario& s, const std::string& out_dir) {
  fsys::create_directories(out_dir);
  double c_hls = 0;
  const auto p = resolve_params(s, &c_hls);
  {
    std::ofstream echo(fsys::path(out_dir) / "config_echo.json");
    echo << scenario_to_json(s, p.chi, c_hls);
  }
  const auto u0 = build_initial_density(s);
  const auto v0 = build_initial_chem(s, u0);

  const auto jko_dir = (fsys::path(out_dir) / "jko").string();
  const auto fd_dir = (fsys::path(out_dir) / "fd").string();
  fsys::create_directories(jko_dir);
  fsys::create_directories(fd_dir);

  const auto opts = jko_options_from(s);
  const auto jko_traj = run_trajectory(u0, v0, p, s.t_final, s.stride, opts);
  auto sum = summarise_jko(s, p, jko_traj, out_dir);
  {
    std::ofstream csv(fsys::path(jko_dir) / "diagnostics.csv");
    csv << kCsvHeader << '\n';
    append_rows(csv, "jko", sum.hash, jko_traj.rows);
  }

  FdConfig cfg;
  cfg.dt = s.fd_dt;
  cfg.t_final = s.t_final;
  const auto fd_traj = run_fd(u0, v0, p, cfg, std::max(1, static_cast<int>(std::lround(
                                                              s.stride * s.h / s.fd_dt))));
  {
    std::ofstream csv(fsys::path(fd_dir) / "diagnostics.csv");
    csv << kCsvHeader << '\n';
    append_rows(csv, "fd", sum.hash, fd_traj.rows);
  }

  const auto rep = compare_trajectories(jko_traj, fd_traj, p);
  {
    std::ofstream csv(fsys::path(out_dir) / "compare.csv");
    csv << "scenario_hash,t,lm_gap_rel,v_gap_rel,energy_jko,energy_fd\n";
    for (const auto& r : rep.rows)
      csv << sum.hash << ',' << format_double(r.t) << ',' << format_double(r.lm_gap_rel) << ','
          << format_double(r.v_gap_rel) << ',' << format_double(r.energy_jko) << ','
          << format_double(r.energy_fd) << '\n';
  }
  sum.checks["fd_completed"] = fd_traj.completed;
  sum.checks["fd_mass"] = fd_traj.max_mass_drift <= 1e-12;
  bool all = true;
  for (const auto& [k, v] : sum.checks) all = all && v;
  if (!all && sum.exit_code == kExitOk) sum.exit_code = kExitInvariantBreach;
  write_summary_json(sum, s, out_dir);
  return sum;
}

SweepResult run_sweep(const Scenario& base, const std::string& axis,
                      const std::vector<double>& values, int workers,
                      const std::string& out_dir) {
  fsys::create_directories(out_dir);
  SweepResult result;
  if (axis != "chi" && axis != "h" && axis != "N" && axis != "tau" && axis != "alpha")
    throw std::invalid_argument("run_sweep: axis must be one of chi, h, N, tau, alpha");

  std::vector<Scenario> members;
  std::vector<std::string> dirs;
  for (double v : values) {
    Scenario s = base;
    if (axis == "chi") {
      s.chi = 0;
      s.chi_rel = v;
    } else if (axis == "h") {
      s.h = v;
    } else if (axis == "N") {
      s.grid.points = static_cast<int>(v);
      s.grid.validate();
    } else if (axis == "tau") {
      s.tau = v;
    } else {
      s.alpha = v;
    }
    // the axis edit participates in the hash
    s.source_text = base.source_text + "\n# sweep " + axis + " = " + format_double(v) + "\n";
    members.push_back(s);
    dirs.push_back((fsys::path(out_dir) / (axis + "_" + format_double(v))).string());
  }

  result.members.resize(members.size());
  std::size_t next = 0;
  while (next < members.size()) {
    const std::size_t batch = std::min<std::size_t>(std::max(workers, 1),
                                                    members.size() - next);
    std::vector<std::future<RunSummary>> futs;
    for (std::size_t k = 0; k < batch; ++k) {
      const std::size_t idx = next + k;
      futs.push_back(std::async(std::launch::async, [&members, &dirs, idx] {
        return run_scenario(members[idx], dirs[idx]);
      }));
    }
    for (std::size_t k = 0; k < batch; ++k) result.members[next + k] = futs[k].get();
    next += batch;
  }

  const auto report = fsys::path(out_dir) / "sweep_report.csv";
  std::ofstream csv(report);
  csv << "axis,value,exit_code,scenario_hash,sup_lm_pow_m,lm_bound,final_energy,final_v_gap\n";
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& m = result.members[i];
    csv << axis << ',' << format_double(values[i]) << ',' << m.exit_code << ',' << m.hash << ','
        << format_double(m.sup_lm_pow_m) << ',' << format_double(m.lm_bound) << ','
        << format_double(m.final_energy) << ',' << format_double(m.final_v_gap) << '\n';
    if (m.exit_code != kExitOk) result.exit_code = kExitInvariantBreach;  // partial sweep
  }

  if (axis == "h") {  // successive refinement gaps from the final checkpoints
    csv << "\nh_coarse,h_fine,final_lm_gap\n";
    for (std::size_t i = 0; i + 1 < members.size(); ++i) {
      try {
        auto final_field = [&](std::size_t idx) {
          const int last = static_cast<int>(
              std::ceil(members[idx].t_final / members[idx].h - 1e-12));
          std::ostringstream name;
          name << "ckpt_" << std::setw(6) << std::setfill('0') << last << "_u.kfld";
          auto blob = read_field_blob((fsys::path(dirs[idx]) / name.str()).string());
          return DensityField{blob.grid, std::move(blob.values)};
        };
        const auto ua = final_field(i);
        const auto ub = final_field(i + 1);
        require_same_grid(ua.grid, ub.grid, "run_sweep");
        std::vector<double> du(ua.values.size());
        for (std::size_t k = 0; k < du.size(); ++k) du[k] = ua.values[k] - ub.values[k];
        const double m_exp = 2.0 - 2.0 / ua.grid.dim;
        csv << format_double(values[i]) << ',' << format_double(values[i + 1]) << ','
            << format_double(lp_norm(ua.grid, du, m_exp)) << '\n';
      } catch (const std::exception&) {
        csv << format_double(values[i]) << ',' << format_double(values[i + 1]) << ",nan\n";
      }
    }
  }
  result.report_path = report.string();
  return result;
}

ChiCReport run_chi_c(int dim, const HlsSearchConfig& cfg, const std::string& out_dir) {
  fsys::create_directories(out_dir);
  ChiCReport rep;
  rep.estimate = estimate_c_hls(dim, cfg);
  const auto path = fsys::path(out_dir) / "hls_estimate.json";
  std::ofstream f(path);
  f << hls_estimate_to_json(rep.estimate);
  rep.json_path = path.string();
  if (!rep.estimate.converged) rep.exit_code = kExitNonConvergence;
  return rep;
}

// ---------------------------------------------------------------------------
// validation battery (toy grids)

namespace {
ValidationItem item(const std::string& name, bool pass, const std::string& detail) {
  return ValidationItem{name, pass, detail};
}
}  // namespace

std::vector<ValidationItem> run_validation_suite() {
  std::vector<ValidationItem> out;

  {  // kernel identity, full box N = 64
    const auto g = GridSpec::full_box(3, 64, 8.0);
    const auto u = gaussian_density(g, 0.5);
    const auto shell = shell_density(g, 2.0, 0.4);
    const double r1 = kernel_identity_residual(g, u.values, 1.0);
    const double r2 = kernel_identity_residual(g, shell.values, 1.0);
    out.push_back(item("kernel_identity_box_n64",
                       r1 <= 1e-4 && r2 <= 1e-4,
                       "gaussian " + format_double(r1) + ", shell " + format_double(r2)));
  }
  {  // kernel identity, radial N = 256
    const auto g = GridSpec::radial(3, 256, 8.0);
    const auto u = gaussian_density(g, 0.5);
    const auto shell = shell_density(g, 2.0, 0.4);
    const double r1 = kernel_identity_residual(g, u.values, 1.0);
    const double r2 = kernel_identity_residual(g, shell.values, 1.0);
    out.push_back(item("kernel_identity_radial_n256", r1 <= 1e-6 && r2 <= 1e-6,
                       "gaussian " + format_double(r1) + ", shell " + format_double(r2)));
  }
  {  // Yukawa closed form
    double worst = 0;
    for (double alpha : {0.5, 1.0, 2.0})
      for (double r : {0.1, 0.5, 1.0, 3.0}) {
        const double q = bessel_kernel_value(alpha, r, 3);
        const double c = yukawa_kernel_d3(alpha, r);
        worst = std::max(worst, std::abs(q - c) / c);
      }
    out.push_back(item("yukawa_closed_form", worst <= 1e-8, "max rel " + format_double(worst)));
  }
  {  // elliptic manufactured solution
    const auto g = GridSpec::radial(3, 128, 8.0);
    const auto target = gaussian_density(g, 0.7);
    const auto lap = apply_laplacian_noflux(g, target.values);
    std::vector<double> rhs(g.cell_count());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = target.values[i] - lap[i];
    const auto rec = elliptic_solve(g, rhs, 0.0, 1.0);
    double worst = 0;
    for (std::size_t i = 0; i < rhs.size(); ++i)
      worst = std::max(worst, std::abs(rec.values[i] - target.values[i]));
    const double resid = noflux_residual(g, 1.0, rec.values, rhs);
    out.push_back(item("elliptic_manufactured", worst <= 1e-8 && resid <= 1e-10,
                       "recovery " + format_double(worst) + ", residual " +
                           format_double(resid)));
  }
  {  // transport anchors
    const auto g = GridSpec::radial(3, 128, 8.0);
    DensityField s1{g, std::vector<double>(g.cell_count(), 0.0)};
    DensityField s2 = s1;
    s1.values[16] = 1.0 / g.cell_volume(16);
    s2.values[48] = 1.0 / g.cell_volume(48);
    const double d = g.radius(48) - g.radius(16);
    const double got = w2_radial(s1, s2).w2_squared;
    const bool shells_ok = std::abs(got - d * d) <= 1e-12 * d * d;

    const auto a = gaussian_density(g, 0.5);
    const auto b = shell_density(g, 2.0, 0.5);
    const double exact = w2_radial(a, b).w2_squared;
    const auto ent = w2_sinkhorn(a, b);
    const double bias = ent.epsilon * (1.0 + std::log(1.0 + 1.0 / ent.epsilon));
    const bool sink_ok =
        ent.converged && std::abs(ent.w2_squared - exact) <= std::max(0.02 * exact, bias);
    out.push_back(item("transport_anchors", shells_ok && sink_ok,
                       "shell " + format_double(got) + " vs " + format_double(d * d) +
                           "; sinkhorn gap " + format_double(std::abs(ent.w2_squared - exact))));
  }
  {  // one-step minimiser bound on a scenario battery (exact-W2 radial members)
    const auto g = GridSpec::radial(3, 64, 8.0);
    bool ok = true;
    std::string detail;
    HlsSearchConfig hcfg;
    hcfg.points = 64;
    hcfg.levels = 1;
    hcfg.ascent_iterations = 80;
    const double c_hls = estimate_c_hls(3, hcfg).c_hls;
    for (double chi_rel : {0.4, 0.8}) {
      for (double alpha : {0.0, 1.0}) {
        for (int fam = 0; fam < 2; ++fam) {
          ModelParams p;
          p.dim = 3;
          p.c_hls = c_hls;
          p.chi = chi_rel * p.chi_c();
          p.alpha = alpha;
          p.tau = 1.0;
          p.step = 1e-3;
          const auto u0 = fam == 0 ? gaussian_density(g, 0.5) : shell_density(g, 2.0, 0.5);
          const auto v0 = alpha > 0 ? apply_bessel(u0, alpha)
                                    : ChemField{g, std::vector<double>(g.cell_count(), 0.0)};
          const double e0 = energy(u0, v0, p).total;
          JkoState st{u0, v0, {}, {}, {}};
          const auto rep = jko_step(st, p, {});
          const double f1 = rep.w2_sq_increment / (2 * p.step * p.chi) +
                            p.tau * rep.v_increment_sq / (2 * p.step) +
                            rep.energy_after.total;
          if (!(f1 <= e0 + 1e-9) || rep.el_residual_v > 1e-10 ||
              std::abs(rep.mass_drift) > 1e-10) {
            ok = false;
            detail += "breach at chi_rel " + format_double(chi_rel) + " alpha " +
                      format_double(alpha) + "; ";
          }
        }
      }
    }
    out.push_back(item("jko_one_step_bound", ok, ok ? "all members" : detail));
  }
  {  // short radial trajectory invariants
    const auto g = GridSpec::radial(3, 64, 8.0);
    ModelParams p;
    p.dim = 3;
    p.c_hls = 3.0;
    p.chi = 1.0;
    p.alpha = 1.0;
    p.tau = 1.0;
    p.step = 1e-3;
    const auto u0 = gaussian_density(g, 0.5);
    const auto v0 = apply_bessel(u0, 1.0);
    const auto traj = run_trajectory(u0, v0, p, 0.02, 10, {});
    out.push_back(item("jko_short_trajectory",
                       traj.completed && traj.telescoping_ok && traj.rows.size() == 20,
                       traj.completed ? "20 steps" : traj.halt_reason));
  }
  {  // full-box entropic step: mass, positivity, energy behaviour
    const auto g = GridSpec::full_box(3, 16, 6.0);
    ModelParams p;
    p.dim = 3;
    p.c_hls = 3.0;
    p.chi = 1.0;
    p.alpha = 1.0;
    p.tau = 1.0;
    p.step = 5e-3;
    const auto u0 = gaussian_density(g, 0.8);
    const auto v0 = apply_bessel(u0, 1.0);
    JkoOptions opts;
    opts.use_entropic = true;
    // the debiased transport surrogate carries an O(eps) self-cost drift
    opts.energy_slack = 1e-3;
    JkoState st{u0, v0, {}, {}, {}};
    bool ok = true;
    std::string detail = "ok";
    try {
      const auto rep = jko_step(st, p, opts);
      double minval = 0;
      for (double x : st.u.values) minval = std::min(minval, x);
      ok = std::abs(rep.mass_drift) <= 1e-10 && minval >= 0 &&
           rep.energy_after.total <= rep.energy_before.total + opts.energy_slack;
      detail = "mass drift " + format_double(rep.mass_drift);
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    out.push_back(item("jko_full_box_step", ok, detail));
  }
  {  // FD conservation over many steps
    const auto g = GridSpec::radial(3, 64, 8.0);
    ModelParams p;
    p.dim = 3;
    p.c_hls = 3.0;
    p.chi = 0.5;
    p.alpha = 1.0;
    p.tau = 1.0;
    p.step = 1e-3;
    const auto u0 = gaussian_density(g, 0.5);
    const auto v0 = apply_bessel(u0, 1.0);
    FdConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 2.0;
    const auto traj = run_fd(u0, v0, p, cfg, 500);
    out.push_back(item("fd_mass_conservation",
                       traj.completed && traj.max_mass_drift <= 1e-12,
                       "drift " + format_double(traj.max_mass_drift)));
  }
  {  // amplitude invariance of the HLS ratio
    const auto g = GridSpec::radial(3, 64, 8.0);
    const auto u = gaussian_density(g, 0.7);
    const double base = hls_ratio(g, u.values, 0.0);
    std::vector<double> scaled(u.values);
    for (auto& x : scaled) x *= 37.0;
    const double rel = std::abs(hls_ratio(g, scaled, 0.0) - base) / base;
    out.push_back(item("hls_amplitude_invariance", rel <= 1e-10, format_double(rel)));
  }
  {  // energy decomposition identity
    const auto g = GridSpec::full_box(3, 64, 8.0);
    ModelParams p;
    p.dim = 3;
    p.c_hls = 3.0;
    p.chi = 1.0;
    p.alpha = 1.0;
    p.tau = 1.0;
    p.step = 1e-3;
    const auto u = gaussian_density(g, 0.5);
    const auto s_field = apply_bessel(u, 1.0);
    const double r = energy_decomposition_check(u, s_field, p);
    out.push_back(item("energy_decomposition", r <= 1e-6, format_double(r)));
  }
  {  // quantile vs entropic minimisers
    const auto g = GridSpec::radial(3, 256, 8.0);
    ModelParams p;
    p.dim = 3;
    p.c_hls = 3.0;
    p.chi = 1.0;
    p.alpha = 1.0;
    p.tau = 1.0;
    p.step = 5e-3;
    const auto u_prev = gaussian_density(g, 0.5);
    const auto v = apply_bessel(u_prev, 1.0);
    const auto a = u_step_quantile(u_prev, v, p);
    const auto b = u_step_entropic(u_prev, v, p, {});
    double l1 = 0;
    for (std::size_t i = 0; i < g.cell_count(); ++i)
      l1 += std::abs(a.u.values[i] - b.u.values[i]) * g.cell_volume(i);
    out.push_back(item("quantile_vs_entropic_step", l1 <= 0.02, "L1 gap " + format_double(l1)));
  }

  return out;
}

}  // namespace ksflow
