// Acceptance suite: every release-gating property runs here at its pinned
// tolerance and prints one pass/fail line. Exit status is nonzero when any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ksflow/bessel.hpp"
#include "ksflow/elliptic.hpp"
#include "ksflow/fd.hpp"
#include "ksflow/field_io.hpp"
#include "ksflow/hls.hpp"
#include "ksflow/jko.hpp"
#include "ksflow/runner.hpp"
#include "ksflow/transport.hpp"

using namespace ksflow;
using clk = std::chrono::steady_clock;

namespace {

struct Criterion {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

std::vector<Criterion> g_results;

void run_criterion(const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  Criterion c;
  c.name = name;
  const auto t0 = clk::now();
  try {
    auto [pass, detail] = body();
    c.pass = pass;
    c.detail = detail;
  } catch (const std::exception& e) {
    c.pass = false;
    c.detail = std::string("exception: ") + e.what();
  }
  c.seconds = std::chrono::duration<double>(clk::now() - t0).count();
  std::printf("[%s] %s: %s (%.1f s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
              c.detail.c_str(), c.seconds);
  std::fflush(stdout);
  g_results.push_back(c);
}

std::string fmt(double x) { return format_double(x); }

DensityField random_radial_mix(const GridSpec& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> loc(0.0, 4.0), width(0.15, 1.0), amp(0.2, 1.0);
  DensityField u{g, std::vector<double>(g.cell_count(), 0.0)};
  for (int b = 0; b < 3; ++b) {
    const double c = loc(rng), w = width(rng), a = amp(rng);
    for (std::size_t i = 0; i < u.values.size(); ++i) {
      const double d = (g.radius(i) - c) / w;
      u.values[i] += a * std::exp(-0.5 * d * d);
    }
  }
  normalize_mass(u);
  return u;
}

// unit-mass source-type profile of the critical porous-medium equation
DensityField barenblatt(const GridSpec& g, double t) {
  const int d = g.dim;
  const double m = 2.0 - 2.0 / d;
  const double beta = 1.0 / d;
  const double k = beta * (m - 1.0) / (2.0 * m);
  const double q = 1.0 / (m - 1.0);
  double shape = 0;
  const int n_q = 4000;
  for (int i = 0; i < n_q; ++i) {
    const double s = (i + 0.5) / n_q;
    shape += std::pow(1.0 - s * s, q) * std::pow(s, d - 1) / n_q;
  }
  shape *= unit_sphere_area(d) * std::pow(k, -0.5 * d);
  const double c0 = std::pow(1.0 / shape, 1.0 / (q + 0.5 * d));
  auto u = make_density(g, [&](std::array<double, 3> x) {
    const double val = c0 - k * x[0] * x[0] / std::pow(t, 2.0 * beta);
    return val > 0 ? std::pow(val, q) / t : 0.0;
  });
  normalize_mass(u);
  return u;
}

// discrete L2(delta, T; L^m) gap between two runs sharing snapshot times
double snapshot_lm_gap(const Trajectory& a, const Trajectory& b, double delta, double m) {
  double acc = 0;
  int count = 0;
  for (std::size_t i = 0; i < a.snapshot_times.size(); ++i) {
    const double t = a.snapshot_times[i];
    if (t < delta) continue;
    for (std::size_t j = 0; j < b.snapshot_times.size(); ++j) {
      if (std::abs(b.snapshot_times[j] - t) > 1e-9) continue;
      const GridSpec& g = a.snapshots[i].u.grid;
      std::vector<double> du(g.cell_count());
      for (std::size_t k = 0; k < du.size(); ++k)
        du[k] = a.snapshots[i].u.values[k] - b.snapshots[j].u.values[k];
      const double gap = lp_norm(g, du, m);
      acc += gap * gap;
      ++count;
    }
  }
  return count > 0 ? std::sqrt(acc / count) : HUGE_VAL;
}

}  // namespace

int main() {
  std::printf("== acceptance suite ==\n");
  const auto suite_t0 = clk::now();

  // shared machinery: the shipped C_HLS estimate and the reference scenario
  HlsSearchConfig hls_cfg;
  hls_cfg.points = 256;
  hls_cfg.levels = 2;
  hls_cfg.half_width = 16;
  hls_cfg.seed = 1;
  const auto hls = estimate_c_hls(3, hls_cfg);

  ModelParams ref;
  ref.dim = 3;
  ref.c_hls = hls.c_hls;
  ref.chi = 0.5 * ref.chi_c();
  ref.alpha = 1.0;
  ref.tau = 1.0;
  ref.step = 1e-3;
  const auto ref_grid = GridSpec::radial(3, 256, 8.0);
  const auto ref_u0 = gaussian_density(ref_grid, 0.5);
  const auto ref_v0 = apply_bessel(ref_u0, ref.alpha);

  JkoOptions ref_opts;
  ref_opts.regularity_every = 1;
  ref_opts.calibration_steps = 25;

  Trajectory ref_traj;
  double ref_seconds = 0;
  {
    const auto t0 = clk::now();
    ref_traj = run_trajectory(ref_u0, ref_v0, ref, 0.5, 50, ref_opts);
    ref_seconds = std::chrono::duration<double>(clk::now() - t0).count();
  }

  // 1. energy monotonicity on the reference scenario, runtime cap 10 min
  run_criterion("C1 energy monotonicity", [&]() -> std::pair<bool, std::string> {
    if (!ref_traj.completed) return {false, "run halted: " + ref_traj.halt_reason};
    double prev = ref_traj.initial_energy, worst = -HUGE_VAL;
    for (const auto& r : ref_traj.rows) {
      worst = std::max(worst, r.energy_total - prev);
      prev = r.energy_total;
    }
    const bool ok = worst <= 1e-8 && ref_seconds <= 600.0 && ref_traj.rows.size() == 500;
    return {ok, "max per-step increase " + fmt(worst) + ", runtime " + fmt(ref_seconds) + " s"};
  });

  // 2. telescoping increment bound on the same run
  run_criterion("C2 telescoping increment bound", [&]() -> std::pair<bool, std::string> {
    const double rhs = 2.0 * ref_traj.initial_energy * ref.step +
                       static_cast<double>(ref_traj.rows.size()) * 1e-8;
    const bool ok = ref_traj.telescoping_ok && ref_traj.cum_increment <= rhs;
    return {ok, "sum " + fmt(ref_traj.cum_increment) + " <= " + fmt(rhs)};
  });

  // 3. one-step minimiser bound across the validation battery
  run_criterion("C3 one-step minimiser bound", [&]() -> std::pair<bool, std::string> {
    const auto g = GridSpec::radial(3, 128, 8.0);
    bool ok = true;
    std::string detail;
    int members = 0;
    for (double chi_rel : {0.25, 0.75}) {
      for (double alpha : {0.0, 1.0}) {
        for (int fam = 0; fam < 3; ++fam) {
          ModelParams p = ref;
          p.chi = chi_rel * p.chi_c();
          p.alpha = alpha;
          DensityField u0 =
              fam == 0 ? gaussian_density(g, 0.5)
                       : fam == 1 ? shell_density(g, 2.0, 0.5) : random_radial_mix(g, 42);
          const auto v0 = alpha > 0 ? apply_bessel(u0, alpha)
                                    : ChemField{g, std::vector<double>(g.cell_count(), 0.0)};
          const double e0 = energy(u0, v0, p).total;
          JkoState st{u0, v0, {}, {}, {}};
          const auto rep = jko_step(st, p, {});
          const double f1 = rep.w2_sq_increment / (2 * p.step * p.chi) +
                            p.tau * rep.v_increment_sq / (2 * p.step) +
                            rep.energy_after.total;
          ++members;
          if (!(f1 <= e0 + 1e-9)) {
            ok = false;
            detail += "F_h " + fmt(f1) + " > E0 " + fmt(e0) + " at chi_rel " + fmt(chi_rel) +
                      " alpha " + fmt(alpha) + " fam " + std::to_string(fam) + "; ";
          }
        }
      }
    }
    return {ok, ok ? "F_h[u1,v1] <= E[u0,v0] on all " + std::to_string(members) + " members"
                   : detail};
  });

  // 4. Euler-Lagrange v-equation residual after every v-step
  run_criterion("C4 v-equation EL residual", [&]() -> std::pair<bool, std::string> {
    double worst = 0;
    for (const auto& r : ref_traj.rows) worst = std::max(worst, r.el_res_v);
    return {worst <= 1e-10, "max residual " + fmt(worst) + " <= 1e-10"};
  });

  // 5. L^m a-priori bound along the chi ladder
  run_criterion("C5 L^m a-priori bound", [&]() -> std::pair<bool, std::string> {
    bool ok = true;
    std::string detail;
    for (double chi_rel : {0.25, 0.5, 0.75, 0.9}) {
      ModelParams p = ref;
      p.chi = chi_rel * p.chi_c();
      const auto traj = run_trajectory(ref_u0, ref_v0, p, 0.1, 25, {});
      if (!traj.completed) return {false, "halted at chi_rel " + fmt(chi_rel)};
      double sup = 0;
      for (const auto& r : traj.rows) sup = std::max(sup, std::pow(r.lm_norm, p.m()));
      const double bound = 2.0 * p.chi * traj.initial_energy /
                           (p.c_hls * (p.chi_c() - p.chi));
      if (!(sup <= bound)) ok = false;
      detail += fmt(chi_rel) + ": " + fmt(sup) + " <= " + fmt(bound) + "; ";
    }
    return {ok, detail};
  });

  // 6. discrete kernel identity and the Yukawa closed form
  run_criterion("C6 kernel identity", [&]() -> std::pair<bool, std::string> {
    const auto gb = GridSpec::full_box(3, 64, 8.0);
    const auto gr = GridSpec::radial(3, 256, 8.0);
    double worst_box = 0, worst_rad = 0;
    for (int fam = 0; fam < 2; ++fam) {
      const auto ub = fam == 0 ? gaussian_density(gb, 0.5) : shell_density(gb, 2.0, 0.4);
      worst_box = std::max(worst_box, kernel_identity_residual(gb, ub.values, 1.0));
      const auto ur = fam == 0 ? gaussian_density(gr, 0.5) : shell_density(gr, 2.0, 0.4);
      worst_rad = std::max(worst_rad, kernel_identity_residual(gr, ur.values, 1.0));
      worst_rad = std::max(worst_rad, kernel_identity_residual(gr, ur.values, 0.0));
    }
    double worst_yukawa = 0;
    for (double alpha : {0.5, 1.0, 2.0, 4.0})
      for (double r : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const double q = bessel_kernel_value(alpha, r, 3);
        const double c = yukawa_kernel_d3(alpha, r);
        worst_yukawa = std::max(worst_yukawa, std::abs(q - c) / c);
      }
    const bool ok = worst_box <= 1e-4 && worst_rad <= 1e-6 && worst_yukawa <= 1e-8;
    return {ok, "box " + fmt(worst_box) + " <= 1e-4, radial " + fmt(worst_rad) +
                    " <= 1e-6, yukawa " + fmt(worst_yukawa) + " <= 1e-8"};
  });

  // 7. HLS machinery: dilation identity, screening domination, refinement
  run_criterion("C7 HLS machinery", [&]() -> std::pair<bool, std::string> {
    const auto g = GridSpec::radial(3, 2048, 8.0);
    const double sigma = 0.6, alpha = 1.0;
    auto sample = [&](double lambda) {
      std::vector<double> h(g.cell_count());
      for (std::size_t i = 0; i < h.size(); ++i) {
        const double r = lambda * g.radius(i);
        h[i] = std::pow(lambda, 3) * std::exp(-0.5 * r * r / (sigma * sigma));
      }
      return h;
    };
    const auto base = sample(1.0);
    double worst_dil = 0;
    for (double lambda : {1.25, 2.0}) {
      const auto dil = sample(lambda);
      const double lhs = interaction_integral(g, dil, alpha);
      const double rhs = lambda * interaction_integral(g, base, alpha / (lambda * lambda));
      worst_dil = std::max(worst_dil, std::abs(lhs - rhs) / std::abs(rhs));
    }

    const auto gc = GridSpec::radial(3, 256, 12.0);
    bool dominated = true;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const auto h = random_radial_mix(gc, seed);
      for (double a : {0.25, 0.5, 1.0, 2.0, 4.0})
        dominated = dominated && hls_ratio(gc, h.values, a) <= hls.c_hls * 1.01;
    }
    for (double s : {0.3, 0.6, 1.2}) {
      const auto h = gaussian_density(gc, s);
      for (double a : {0.25, 1.0, 4.0})
        dominated = dominated && hls_ratio(gc, h.values, a) <= hls.c_hls * 1.01;
    }

    const double refine_change = hls.history.size() >= 2 ? hls.history.back().rel_change : 1.0;
    const bool ok = worst_dil <= 1e-3 && dominated && refine_change <= 0.01;
    return {ok, "dilation " + fmt(worst_dil) + " <= 1e-3; screening dominated: " +
                    (dominated ? "yes" : "NO") + "; refinement change " + fmt(refine_change) +
                    " <= 1%"};
  });

  // 8. transport exactness anchors
  run_criterion("C8 transport anchors", [&]() -> std::pair<bool, std::string> {
    const auto g = GridSpec::radial(3, 128, 8.0);
    DensityField s1{g, std::vector<double>(g.cell_count(), 0.0)};
    DensityField s2 = s1;
    s1.values[20] = 1.0 / g.cell_volume(20);
    s2.values[70] = 1.0 / g.cell_volume(70);
    const double d = g.radius(70) - g.radius(20);
    const double got = w2_radial(s1, s2).w2_squared;
    const bool shells_ok = std::abs(got - d * d) <= 1e-12 * d * d;

    int sink_fail = 0;
    double worst_gap = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto a = random_radial_mix(g, 100 + 2 * seed);
      const auto b = random_radial_mix(g, 101 + 2 * seed);
      const double exact = w2_radial(a, b).w2_squared;
      const auto ent = w2_sinkhorn(a, b);
      const double bias = ent.epsilon * (1.0 + std::log(1.0 + 1.0 / ent.epsilon));
      const double tol = std::max(0.02 * exact, bias);
      if (!ent.converged || std::abs(ent.w2_squared - exact) > tol) ++sink_fail;
      worst_gap = std::max(worst_gap, std::abs(ent.w2_squared - exact) /
                                          std::max(exact, 1e-12));
    }

    int tri_fail = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto a = random_radial_mix(g, 300 + 3 * seed);
      const auto b = random_radial_mix(g, 301 + 3 * seed);
      const auto c = random_radial_mix(g, 302 + 3 * seed);
      if (w2_triangle_check(a, b, c).slack < -1e-9) ++tri_fail;
    }
    const bool ok = shells_ok && sink_fail == 0 && tri_fail == 0;
    return {ok, "shells exact: " + std::string(shells_ok ? "yes" : "NO") +
                    "; sinkhorn pairs failing: " + std::to_string(sink_fail) +
                    " (worst rel gap " + fmt(worst_gap) + "); triangle failures: " +
                    std::to_string(tri_fail) + "/100"};
  });

  // 9. oracle agreement with the FD solver, plus the Barenblatt exponent
  run_criterion("C9 oracle agreement", [&]() -> std::pair<bool, std::string> {
    FdConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 0.5;
    const auto fd_ref = run_fd(ref_u0, ref_v0, ref, cfg, 50);
    if (!fd_ref.completed) return {false, "fd reference halted: " + fd_ref.halt_reason};
    const auto rep = compare_trajectories(ref_traj, fd_ref, ref);
    const double gap_ref = rep.final_lm_gap;

    // the reference pair already is the halved version of the 2e-3 pair
    ModelParams coarse = ref;
    coarse.step = 2e-3;
    const auto jko_coarse = run_trajectory(ref_u0, ref_v0, coarse, 0.5, 25, {});
    FdConfig cfg_coarse;
    cfg_coarse.dt = 2e-3;
    cfg_coarse.t_final = 0.5;
    const auto fd_coarse = run_fd(ref_u0, ref_v0, coarse, cfg_coarse, 25);
    const double gap_full = compare_trajectories(jko_coarse, fd_coarse, coarse).final_lm_gap;
    const double gap_half = gap_ref;

    // decoupled spreading exponent (drift switched off by a vanishing chi)
    const auto gb = GridSpec::radial(3, 512, 12.0);
    ModelParams pme = ref;
    pme.chi = 1e-12;
    FdConfig bcfg;
    bcfg.dt = 2e-3;
    FdState st{barenblatt(gb, 1.0), ChemField{gb, std::vector<double>(gb.cell_count(), 0.0)},
               0.0};
    std::vector<double> ts{1.0}, linf{par::max_terms(
                                      gb.cell_count(),
                                      [&](std::size_t i) { return st.u.values[i]; })};
    int n = 0;
    while (st.t < 9.0 - 1e-9) {
      fd_step(st, bcfg, pme);
      if (++n % 500 == 0) {
        ts.push_back(1.0 + st.t);
        linf.push_back(
            par::max_terms(gb.cell_count(), [&](std::size_t i) { return st.u.values[i]; }));
      }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double x = std::log(ts[i]), y = std::log(linf[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double np = static_cast<double>(ts.size());
    const double slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);

    const bool ok = gap_ref <= 0.05 && gap_half < gap_full && std::abs(slope + 1.0) <= 0.05;
    return {ok, "ref gap " + fmt(gap_ref) + " <= 0.05; halved " + fmt(gap_half) + " < " +
                    fmt(gap_full) + "; barenblatt slope " + fmt(slope) + " (target -1 +/- 5%)"};
  });

  // 10. h-refinement Cauchy study and time-modulus stability
  run_criterion("C10 h-refinement Cauchy", [&]() -> std::pair<bool, std::string> {
    const double t_end = 0.26;
    std::vector<double> ladder{4e-3, 2e-3, 1e-3, 5e-4};
    std::vector<Trajectory> runs;
    for (double h : ladder) {
      ModelParams p = ref;
      p.step = h;
      const int stride = static_cast<int>(std::lround(0.02 / h));
      runs.push_back(run_trajectory(ref_u0, ref_v0, p, t_end, stride, {}));
      if (!runs.back().completed)
        return {false, "run at h " + fmt(h) + " halted: " + runs.back().halt_reason};
    }
    std::vector<double> gaps;
    for (std::size_t i = 0; i + 1 < runs.size(); ++i)
      gaps.push_back(snapshot_lm_gap(runs[i], runs[i + 1], 0.02, ref.m()));
    const bool decreasing = gaps[0] > gaps[1] && gaps[1] > gaps[2];

    std::vector<double> c7;
    for (std::size_t i = 0; i < 3; ++i) c7.push_back(time_modulus(runs[i]).c7_v);
    std::vector<double> sorted = c7;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[1];
    const bool stable = sorted[0] >= 0.8 * med && sorted[2] <= 1.2 * med;

    return {decreasing && stable,
            "gaps " + fmt(gaps[0]) + " > " + fmt(gaps[1]) + " > " + fmt(gaps[2]) +
                "; C7 ratios " + fmt(c7[0]) + ", " + fmt(c7[1]) + ", " + fmt(c7[2])};
  });

  // 11. regularity diagnostic with the calibrated constant
  run_criterion("C11 regularity diagnostic", [&]() -> std::pair<bool, std::string> {
    const bool ok = ref_traj.regularity_ok && ref_traj.entropy_sign_ok;
    return {ok, std::string("dissipation bound: ") +
                    (ref_traj.regularity_ok ? "held on every accepted step" : "VIOLATED") +
                    "; entropy sign: " + (ref_traj.entropy_sign_ok ? "ok" : "VIOLATED") +
                    "; calibrated C2 " + fmt(ref_traj.c2_calibrated)};
  });

  // 12. conservation, positivity, and the validation battery
  run_criterion("C12 conservation and validation suite", [&]() -> std::pair<bool, std::string> {
    FdConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_final = 0.1;
    const auto fd_ref = run_fd(ref_u0, ref_v0, ref, cfg, 25);
    const auto t0 = clk::now();
    const auto items = run_validation_suite();
    const double secs = std::chrono::duration<double>(clk::now() - t0).count();
    bool all = true;
    std::string failing;
    for (const auto& it : items) {
      if (!it.pass) {
        all = false;
        failing += it.name + "; ";
      }
    }
    const bool ok = ref_traj.max_mass_drift <= 1e-10 && ref_traj.max_clipped_mass <= 1e-12 &&
                    fd_ref.max_mass_drift <= 1e-12 && all && secs <= 300.0;
    return {ok, "jko drift " + fmt(ref_traj.max_mass_drift) + " <= 1e-10, fd drift " +
                    fmt(fd_ref.max_mass_drift) + " <= 1e-12, validate " +
                    std::to_string(items.size()) + " checks in " + fmt(secs) + " s" +
                    (all ? "" : "; failing: " + failing)};
  });

  const double total = std::chrono::duration<double>(clk::now() - suite_t0).count();
  int failures = 0;
  for (const auto& c : g_results)
    if (!c.pass) ++failures;
  std::printf("== %zu criteria, %d failing, %.1f s total ==\n", g_results.size(), failures,
              total);
  return failures == 0 ? 0 : 1;
}
