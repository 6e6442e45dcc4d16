#include "ksflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "json.hpp"
#include "ksflow/detail/logsumexp.hpp"
#include "ksflow/field_io.hpp"
#include "ksflow/par.hpp"

namespace ksflow {

double default_sinkhorn_epsilon(const GridSpec& grid) {
  return 0.01 * grid.spacing() * grid.domain_diameter();
}

namespace {

constexpr double kUnitMassTol = 1e-8;

// piecewise-linear CDF of the radius distribution: breakpoints at cumulative
// cell masses, mass spread uniformly in radius within each cell
struct RadialCdf {
  std::vector<double> cum;   // cumulative mass at cell edges (size n+1)
  std::vector<double> edge;  // radius of cell edges
  double total = 0;

  static RadialCdf build(const DensityField& u) {
    if (u.grid.mode != GridMode::radial)
      throw std::invalid_argument("w2_radial: radial-mode fields required");
    const std::size_t n = u.grid.cell_count();
    RadialCdf c;
    c.cum.resize(n + 1, 0.0);
    c.edge.resize(n + 1);
    const double h = u.grid.spacing();
    for (std::size_t i = 0; i <= n; ++i) c.edge[i] = h * static_cast<double>(i);
    for (std::size_t i = 0; i < n; ++i) {
      const double m = u.values[i] * u.grid.cell_volume(i);
      if (m < 0) throw std::domain_error("w2_radial: negative density");
      c.cum[i + 1] = c.cum[i] + m;
    }
    c.total = c.cum[n];
    if (std::abs(c.total - 1.0) > kUnitMassTol)
      throw std::domain_error("w2_radial: unit mass required (got " + std::to_string(c.total) +
                              ")");
    return c;
  }

  // quantile at mass coordinate s in [0, total]
  double quantile(double s) const {
    if (s >= total) {  // supremum of the support
      for (std::size_t i = cum.size() - 1; i-- > 0;)
        if (cum[i + 1] > cum[i]) return edge[i + 1];
      return edge.front();
    }
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    std::size_t i = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
    while (i + 1 < cum.size() && cum[i + 1] <= cum[i]) ++i;  // skip empty cells
    if (i + 1 >= cum.size()) return edge.back();
    const double m = cum[i + 1] - cum[i];
    if (m <= 0) return edge[i];
    const double t = (s - cum[i]) / m;
    return edge[i] + t * (edge[i + 1] - edge[i]);
  }
};

}  // namespace

std::string transport_result_to_json(const TransportResult& res, const GridSpec& grid,
                                     const std::string& dual_dir) {
  nlohmann::json j;
  j["w2_squared"] = res.w2_squared;
  j["epsilon"] = res.epsilon;
  j["iterations"] = res.iterations;
  j["converged"] = res.converged;
  j["marginal_residual"] = res.marginal_residual;
  if (!res.quantile_map.empty()) j["quantile_map"] = res.quantile_map;
  if (!dual_dir.empty() && !res.dual_f.empty()) {
    const auto dir = std::filesystem::path(dual_dir);
    std::filesystem::create_directories(dir);
    const auto f_path = (dir / "dual_f.kfld").string();
    const auto g_path = (dir / "dual_g.kfld").string();
    write_field_blob(f_path, grid, res.dual_f);
    write_field_blob(g_path, grid, res.dual_g);
    j["dual_f_path"] = f_path;
    j["dual_g_path"] = g_path;
  }
  return j.dump(2);
}

std::vector<double> radial_quantiles(const DensityField& u, int count) {
  const auto cdf = RadialCdf::build(u);
  std::vector<double> q(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    q[static_cast<std::size_t>(k)] = cdf.quantile(cdf.total * (k + 0.5) / count);
  return q;
}

std::vector<double> radial_quantile_edges(const DensityField& u, int count) {
  const auto cdf = RadialCdf::build(u);
  std::vector<double> q(static_cast<std::size_t>(count) + 1);
  for (int k = 0; k <= count; ++k)
    q[static_cast<std::size_t>(k)] = cdf.quantile(cdf.total * k / count);
  return q;
}

TransportResult w2_radial(const DensityField& u1, const DensityField& u2) {
  require_same_grid(u1.grid, u2.grid, "w2_radial");
  const auto c1 = RadialCdf::build(u1);
  const auto c2 = RadialCdf::build(u2);
  const double total = std::min(c1.total, c2.total);

  // merge the breakpoint sets; the quantile difference is linear in between
  std::vector<double> breaks;
  breaks.reserve(c1.cum.size() + c2.cum.size());
  for (double s : c1.cum)
    if (s > 0 && s < total) breaks.push_back(s);
  for (double s : c2.cum)
    if (s > 0 && s < total) breaks.push_back(s);
  breaks.push_back(0.0);
  breaks.push_back(total);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  double acc = 0.0;
  double da = c1.quantile(breaks[0]) - c2.quantile(breaks[0]);
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double b = breaks[k + 1];
    const double db = c1.quantile(b) - c2.quantile(b);
    acc += (b - breaks[k]) * (da * da + da * db + db * db) / 3.0;
    da = db;
  }

  TransportResult res;
  res.w2_squared = acc;
  res.epsilon = 0;
  res.iterations = 0;
  res.converged = true;
  res.marginal_residual = 0;
  const int samples = 64;
  res.quantile_map.reserve(2 * samples);
  for (int k = 0; k < samples; ++k) {
    const double s = total * (k + 0.5) / samples;
    res.quantile_map.push_back(c1.quantile(s));
    res.quantile_map.push_back(c2.quantile(s));
  }
  return res;
}

// ---------------------------------------------------------------------------
// log-domain entropic solver

namespace {

struct EntropicProblem {
  detail::LogKernel kernel;
  const GridSpec* grid = nullptr;
  std::vector<double> log_a, log_b;
  std::vector<double> a, b;  // masses
  bool dense = false;

  // T(g)(x) = -eps LSE_y[ log b(y) + (g(y) - C(x,y))/eps ]
  void apply(const std::vector<double>& g, const std::vector<double>& log_marginal, double eps,
             std::vector<double>& out) const {
    kernel.apply(g, log_marginal, eps, out);
  }
};

struct OtValue {
  double value = 0;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;
};

// standard alternating iteration on (f, g); residual is the L1 row-marginal gap
OtValue solve_ot(const EntropicProblem& prob, double eps_target, const SinkhornOptions& opts,
                 std::vector<double>& f, std::vector<double>& g) {
  const std::size_t n = prob.a.size();
  if (f.size() != n) f.assign(n, 0.0);
  if (g.size() != n) g.assign(n, 0.0);
  OtValue out;

  double cost_scale = 0;
  if (prob.dense) {
    const double d = prob.kernel.positions.back() - prob.kernel.positions.front();
    cost_scale = d * d;
  } else {
    const double d = prob.grid->domain_diameter();
    cost_scale = d * d;
  }
  std::vector<double> eps_ladder;
  for (double e = std::max(eps_target, 0.25 * cost_scale); e > eps_target; e *= 0.5)
    eps_ladder.push_back(e);
  eps_ladder.push_back(eps_target);

  std::vector<double> fn, gn;
  int iters = 0;
  for (std::size_t lev = 0; lev < eps_ladder.size(); ++lev) {
    const double eps = eps_ladder[lev];
    const bool last = lev + 1 == eps_ladder.size();
    const int cap = last ? opts.max_iterations : opts.anneal_iterations;
    for (int it = 0; it < cap; ++it) {
      prob.apply(g, prob.log_b, eps, fn);  // balances the first marginal
      f.swap(fn);
      prob.apply(f, prob.log_a, eps, gn);  // balances the second
      g.swap(gn);
      ++iters;
      // row residual: a_i (exp((f_i - T(g)_i)/eps) - 1) with the refreshed T(g)
      prob.apply(g, prob.log_b, eps, fn);
      double res = par::sum_terms(n, [&](std::size_t i) {
        return prob.a[i] > 0 ? prob.a[i] * std::abs(std::exp((f[i] - fn[i]) / eps) - 1.0) : 0.0;
      });
      if (last) out.residual_history.push_back(res);
      if (last && res <= opts.marginal_tol) {
        out.converged = true;
        out.residual = res;
        break;
      }
      if (!last && it + 1 == cap) out.residual = res;
      if (last && it + 1 == cap) out.residual = res;
      if (!last && res <= 10 * opts.marginal_tol) break;  // level converged early
    }
    if (out.converged && last) break;
  }
  out.iterations = iters;
  // dual value with the mass-defect correction
  const double eps = eps_ladder.back();
  std::vector<double> tg(n);
  prob.apply(g, prob.log_b, eps, tg);
  const double plan_mass = par::sum_terms(n, [&](std::size_t i) {
    return prob.a[i] > 0 ? prob.a[i] * std::exp((f[i] - tg[i]) / eps) : 0.0;
  });
  const double fa = par::sum_terms(n, [&](std::size_t i) { return f[i] * prob.a[i]; });
  const double gb = par::sum_terms(n, [&](std::size_t i) { return g[i] * prob.b[i]; });
  const double mass_a = par::sum_terms(n, [&](std::size_t i) { return prob.a[i]; });
  const double mass_b = par::sum_terms(n, [&](std::size_t i) { return prob.b[i]; });
  out.value = fa + gb - eps * (plan_mass - mass_a * mass_b);
  return out;
}

// symmetric self-problem OT_eps(a, a) via the averaged fixed point
OtValue solve_self(const EntropicProblem& prob_a, double eps_target, const SinkhornOptions& opts,
                   std::vector<double>& p) {
  const std::size_t n = prob_a.a.size();
  if (p.size() != n) p.assign(n, 0.0);
  OtValue out;
  std::vector<double> tp(n);
  const int cap = opts.max_iterations;
  for (int it = 0; it < cap; ++it) {
    prob_a.apply(p, prob_a.log_a, eps_target, tp);
    double delta = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double np = 0.5 * (p[i] + tp[i]);
      delta = std::max(delta, std::abs(np - p[i]));
      p[i] = np;
    }
    ++out.iterations;
    if (delta <= 0.25 * eps_target * opts.marginal_tol || delta <= 1e-13) {
      out.converged = true;
      break;
    }
  }
  prob_a.apply(p, prob_a.log_a, eps_target, tp);
  const double plan_mass = par::sum_terms(n, [&](std::size_t i) {
    return prob_a.a[i] > 0 ? prob_a.a[i] * std::exp((p[i] - tp[i]) / eps_target) : 0.0;
  });
  const double pa = par::sum_terms(n, [&](std::size_t i) { return p[i] * prob_a.a[i]; });
  const double mass_a = par::sum_terms(n, [&](std::size_t i) { return prob_a.a[i]; });
  out.value = 2.0 * pa - eps_target * (plan_mass - mass_a * mass_a);
  out.residual = 0;
  return out;
}

EntropicProblem make_problem(const DensityField& u1, const DensityField& u2) {
  require_same_grid(u1.grid, u2.grid, "w2_sinkhorn");
  EntropicProblem prob;
  prob.grid = &u1.grid;
  prob.kernel = detail::LogKernel::for_grid(u1.grid);
  prob.dense = prob.kernel.dense;
  const std::size_t n = u1.grid.cell_count();
  prob.a.resize(n);
  prob.b.resize(n);
  prob.log_a.resize(n);
  prob.log_b.resize(n);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    prob.a[i] = u1.values[i] * u1.grid.cell_volume(i);
    prob.b[i] = u2.values[i] * u2.grid.cell_volume(i);
    if (prob.a[i] < 0 || prob.b[i] < 0) throw std::domain_error("w2_sinkhorn: negative density");
    prob.log_a[i] = prob.a[i] > 0 ? std::log(prob.a[i]) : -HUGE_VAL;
    prob.log_b[i] = prob.b[i] > 0 ? std::log(prob.b[i]) : -HUGE_VAL;
    ma += prob.a[i];
    mb += prob.b[i];
  }
  if (std::abs(ma - 1.0) > kUnitMassTol || std::abs(mb - 1.0) > kUnitMassTol)
    throw std::domain_error("w2_sinkhorn: unit masses required");
  return prob;
}

}  // namespace

TransportResult w2_sinkhorn(const DensityField& u1, const DensityField& u2,
                            const SinkhornOptions& opts) {
  auto prob = make_problem(u1, u2);
  const double eps = opts.epsilon > 0 ? opts.epsilon : default_sinkhorn_epsilon(u1.grid);

  TransportResult res;
  res.epsilon = eps;
  std::vector<double> f = opts.warm_f, g = opts.warm_g;
  const auto ot_ab = solve_ot(prob, eps, opts, f, g);
  res.iterations = ot_ab.iterations;
  res.converged = ot_ab.converged;
  res.marginal_residual = ot_ab.residual;
  res.residual_history = ot_ab.residual_history;
  res.dual_f = f;
  res.dual_g = g;
  double value = ot_ab.value;

  if (opts.debias) {
    EntropicProblem pa = prob;
    pa.b = pa.a;
    pa.log_b = pa.log_a;
    EntropicProblem pb = prob;
    pb.a = pb.b;
    pb.log_a = pb.log_b;
    std::vector<double> p, q;
    const auto ot_aa = solve_self(pa, eps, opts, p);
    const auto ot_bb = solve_self(pb, eps, opts, q);
    res.iterations += ot_aa.iterations + ot_bb.iterations;
    res.converged = res.converged && ot_aa.converged && ot_bb.converged;
    value -= 0.5 * (ot_aa.value + ot_bb.value);
  }
  res.w2_squared = value;
  return res;
}

TriangleReport w2_triangle_check(const DensityField& u1, const DensityField& u2,
                                 const DensityField& u3, bool use_sinkhorn,
                                 const SinkhornOptions& opts) {
  TriangleReport rep;
  auto dist = [&](const DensityField& a, const DensityField& b) {
    const double sq = use_sinkhorn ? w2_sinkhorn(a, b, opts).w2_squared
                                   : w2_radial(a, b).w2_squared;
    return std::sqrt(std::max(sq, 0.0));
  };
  rep.d12 = dist(u1, u2);
  rep.d23 = dist(u2, u3);
  rep.d13 = dist(u1, u3);
  rep.slack = rep.d12 + rep.d23 - rep.d13;
  rep.metric_asserted = !use_sinkhorn;
  if (!use_sinkhorn && rep.slack < -1e-9 * std::max(rep.d13, 1.0))
    throw std::logic_error("w2_triangle_check: triangle inequality violated");
  return rep;
}

}  // namespace ksflow
