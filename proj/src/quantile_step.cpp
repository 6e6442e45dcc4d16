#include "ksflow/quantile_step.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ksflow/par.hpp"

namespace ksflow {

namespace {

// 4-point Gauss-Legendre on [0, 1]
constexpr double kGlNode[4] = {0.06943184420297371, 0.33000947820757187, 0.6699905217924281,
                               0.9305681557970263};
constexpr double kGlWeight[4] = {0.17392742256872693, 0.32607257743127305, 0.32607257743127305,
                                 0.17392742256872693};

struct LinearInterp {
  const GridSpec* grid;
  const std::vector<double>* values;

  double operator()(double r) const {
    const double h = grid->spacing();
    const std::size_t n = values->size();
    const double t = r / h - 0.5;
    if (t <= 0) return (*values)[0];
    if (t >= double(n - 1)) return (*values)[n - 1];
    const auto i = static_cast<std::size_t>(t);
    const double w = t - double(i);
    return (1 - w) * (*values)[i] + w * (*values)[i + 1];
  }
  double slope(double r) const {
    const double h = grid->spacing();
    const std::size_t n = values->size();
    const double t = r / h - 0.5;
    if (t <= 0 || t >= double(n - 1)) return 0.0;
    const auto i = static_cast<std::size_t>(t);
    return ((*values)[i + 1] - (*values)[i]) / h;
  }
};

// pool-adjacent-violators: l2 projection onto nondecreasing sequences
void isotonic_project(std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> level(n), weight(n);
  std::vector<std::size_t> count(n);
  std::size_t blocks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    level[blocks] = y[i];
    weight[blocks] = 1;
    count[blocks] = 1;
    ++blocks;
    while (blocks > 1 && level[blocks - 2] > level[blocks - 1]) {
      const double w = weight[blocks - 2] + weight[blocks - 1];
      level[blocks - 2] =
          (level[blocks - 2] * weight[blocks - 2] + level[blocks - 1] * weight[blocks - 1]) / w;
      weight[blocks - 2] = w;
      count[blocks - 2] += count[blocks - 1];
      --blocks;
    }
  }
  std::size_t pos = 0;
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t k = 0; k < count[b]; ++k) y[pos++] = level[b];
}

struct Objective {
  int dim;
  double m;
  double chi;
  double inv_2h_chi;  // 1/(2 h chi)
  double sigma_d;
  const std::vector<double>* masses;    // per shell
  const std::vector<double>* base_pow;  // initial edges^d (the cell edges)
  LinearInterp v;

  static double x_of(double theta, double nu_lo, double nu_hi, double inv_dim) {
    return std::pow(nu_lo + theta * (nu_hi - nu_lo), inv_dim);
  }

  double value(const std::vector<double>& y) const {
    const std::size_t n = masses->size();
    const double inv_dim = 1.0 / dim;
    return par::sum_terms(n, [&](std::size_t j) {
      const double mu = (*masses)[j];
      if (mu <= 0) return 0.0;
      const double nu_lo = std::pow(y[j], dim), nu_hi = std::pow(y[j + 1], dim);
      const double pl = (*base_pow)[j], ph = (*base_pow)[j + 1];
      double w2 = 0;
      for (int q = 0; q < 4; ++q) {
        const double d =
            x_of(kGlNode[q], nu_lo, nu_hi, inv_dim) - x_of(kGlNode[q], pl, ph, inv_dim);
        w2 += kGlWeight[q] * d * d;
      }
      const double vol = sigma_d * (nu_hi - nu_lo) / dim;
      const double internal =
          vol > 0 ? std::pow(mu, m) * std::pow(vol, 1.0 - m) / (chi * (m - 1.0)) : HUGE_VAL;
      const double rbar = std::pow(0.5 * (nu_lo + nu_hi), inv_dim);
      return mu * (w2 * inv_2h_chi - v(rbar)) + internal;
    });
  }

  void gradient(const std::vector<double>& y, std::vector<double>& g) const {
    const std::size_t n = masses->size();
    g.assign(n + 1, 0.0);
    const double inv_dim = 1.0 / dim;
    for (std::size_t j = 0; j < n; ++j) {
      const double mu = (*masses)[j];
      if (mu <= 0) continue;
      const double nu_lo = std::pow(y[j], dim), nu_hi = std::pow(y[j + 1], dim);
      const double pl = (*base_pow)[j], ph = (*base_pow)[j + 1];
      const double dnu_lo = dim * std::pow(y[j], dim - 1);
      const double dnu_hi = dim * std::pow(y[j + 1], dim - 1);
      for (int q = 0; q < 4; ++q) {
        const double theta = kGlNode[q];
        const double x = x_of(theta, nu_lo, nu_hi, inv_dim);
        const double xp = x_of(theta, pl, ph, inv_dim);
        const double common = 2.0 * kGlWeight[q] * (x - xp) * mu * inv_2h_chi * inv_dim *
                              std::pow(x, 1 - dim);
        g[j] += common * (1 - theta) * dnu_lo;
        g[j + 1] += common * theta * dnu_hi;
      }
      const double vol = sigma_d * (nu_hi - nu_lo) / dim;
      if (vol > 0) {
        const double de_dvol =
            std::pow(mu, m) * (1.0 - m) * std::pow(vol, -m) / (chi * (m - 1.0));
        g[j] += de_dvol * (-sigma_d * dnu_lo / dim);
        g[j + 1] += de_dvol * (sigma_d * dnu_hi / dim);
      }
      const double nu_bar = 0.5 * (nu_lo + nu_hi);
      const double rbar = std::pow(nu_bar, inv_dim);
      const double dv = v.slope(rbar);
      const double drbar = inv_dim * std::pow(rbar, 1 - dim) * 0.5;
      g[j] += -mu * dv * drbar * dnu_lo;
      g[j + 1] += -mu * dv * drbar * dnu_hi;
    }
  }

  // symmetric tridiagonal Hessian: each piece couples a consecutive edge pair
  // (the piecewise-linear potential contributes through the map curvature only)
  void hessian(const std::vector<double>& y, std::vector<double>& diag,
               std::vector<double>& off) const {
    const std::size_t n = masses->size();
    diag.assign(n + 1, 0.0);
    off.assign(n, 0.0);
    const double inv_dim = 1.0 / dim;
    for (std::size_t j = 0; j < n; ++j) {
      const double mu = (*masses)[j];
      if (mu <= 0) continue;
      const double a = y[j], b = y[j + 1];
      const double nu_lo = std::pow(a, dim), nu_hi = std::pow(b, dim);
      const double pl = (*base_pow)[j], ph = (*base_pow)[j + 1];
      const double da = dim * std::pow(a, dim - 1);
      const double db = dim * std::pow(b, dim - 1);
      const double dda = dim * (dim - 1) * (dim >= 2 ? std::pow(a, dim - 2) : 0.0);
      const double ddb = dim * (dim - 1) * (dim >= 2 ? std::pow(b, dim - 2) : 0.0);
      double haa = 0, hbb = 0, hab = 0;

      for (int q = 0; q < 4; ++q) {
        const double theta = kGlNode[q];
        const double x = x_of(theta, nu_lo, nu_hi, inv_dim);
        const double xp = x_of(theta, pl, ph, inv_dim);
        const double xpow = std::pow(x, 1 - dim);
        const double xa = (1 - theta) * inv_dim * da * xpow;
        const double xb = theta * inv_dim * db * xpow;
        const double dxpow_fac = (1.0 - dim) * std::pow(x, -dim);
        const double xaa = (1 - theta) * inv_dim * (dda * xpow + da * dxpow_fac * xa);
        const double xbb = theta * inv_dim * (ddb * xpow + db * dxpow_fac * xb);
        const double xab = (1 - theta) * inv_dim * da * dxpow_fac * xb;
        const double w = 2.0 * kGlWeight[q] * mu * inv_2h_chi;
        haa += w * (xa * xa + (x - xp) * xaa);
        hbb += w * (xb * xb + (x - xp) * xbb);
        hab += w * (xa * xb + (x - xp) * xab);
      }

      const double vol = sigma_d * (nu_hi - nu_lo) / dim;
      if (vol > 0) {
        const double c = std::pow(mu, m) / (chi * (m - 1.0));
        const double e1 = c * (1.0 - m) * std::pow(vol, -m);
        const double e2 = c * (1.0 - m) * (-m) * std::pow(vol, -m - 1.0);
        const double va = -sigma_d * da / dim, vb = sigma_d * db / dim;
        const double vaa = -sigma_d * dda / dim, vbb = sigma_d * ddb / dim;
        haa += e2 * va * va + e1 * vaa;
        hbb += e2 * vb * vb + e1 * vbb;
        hab += e2 * va * vb;
      }

      const double nu_bar = 0.5 * (nu_lo + nu_hi);
      const double rbar = std::pow(nu_bar, inv_dim);
      const double dv = v.slope(rbar);
      const double rpow = std::pow(rbar, 1 - dim);
      const double ra = inv_dim * rpow * 0.5 * da;
      const double rb = inv_dim * rpow * 0.5 * db;
      const double drpow_fac = (1.0 - dim) * std::pow(rbar, -dim);
      const double raa = inv_dim * 0.5 * (dda * rpow + da * drpow_fac * ra);
      const double rbb = inv_dim * 0.5 * (ddb * rpow + db * drpow_fac * rb);
      const double rab = inv_dim * 0.5 * da * drpow_fac * rb;
      haa += -mu * dv * raa;
      hbb += -mu * dv * rbb;
      hab += -mu * dv * rab;

      diag[j] += haa;
      diag[j + 1] += hbb;
      off[j] += hab;
    }
  }
};

// damped tridiagonal Newton solve: (H + lambda I) p = -g
bool newton_direction(const std::vector<double>& diag, const std::vector<double>& off,
                      const std::vector<double>& g, double lambda, std::vector<double>& p) {
  const std::size_t n = g.size();
  std::vector<double> cp(n), dp(n);
  p.assign(n, 0.0);
  const double d0 = diag[0] + lambda;
  if (d0 <= 0) return false;
  cp[0] = (n > 1 ? off[0] : 0.0) / d0;
  dp[0] = -g[0] / d0;
  for (std::size_t i = 1; i < n; ++i) {
    const double m = diag[i] + lambda - off[i - 1] * cp[i - 1];
    if (m <= 0) return false;
    cp[i] = i + 1 < n ? off[i] / m : 0.0;
    dp[i] = (-g[i] - off[i - 1] * dp[i - 1]) / m;
  }
  p[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) p[i] = dp[i] - cp[i] * p[i + 1];
  return true;
}

}  // namespace

DensityField deposit_from_pieces(const GridSpec& grid, std::span<const double> edges,
                                 std::span<const double> masses) {
  if (grid.mode != GridMode::radial)
    throw std::invalid_argument("deposit_from_pieces: radial grid required");
  if (edges.size() != masses.size() + 1)
    throw std::invalid_argument("deposit_from_pieces: edges/masses size mismatch");
  const double h = grid.spacing();
  const std::size_t n = grid.cell_count();
  std::vector<double> cell_mass(n, 0.0);
  double total = 0;
  for (std::size_t j = 0; j < masses.size(); ++j) {
    const double mu = masses[j];
    if (mu <= 0) continue;
    total += mu;
    const double lo = edges[j], hi = std::min(edges[j + 1], h * double(n));
    const double nu_lo = std::pow(lo, grid.dim), nu_hi = std::pow(edges[j + 1], grid.dim);
    if (!(edges[j + 1] > lo)) {
      const auto i = std::min(static_cast<std::size_t>(lo / h), n - 1);
      cell_mass[i] += mu;
      continue;
    }
    const auto i_lo = std::min(static_cast<std::size_t>(lo / h), n - 1);
    const auto i_hi = std::min(static_cast<std::size_t>(hi / h), n - 1);
    double deposited = 0;
    for (std::size_t i = i_lo; i <= i_hi; ++i) {
      const double a = std::max(lo, h * static_cast<double>(i));
      const double b = std::min(edges[j + 1], h * static_cast<double>(i + 1));
      if (b <= a) continue;
      const double frac = (std::pow(b, grid.dim) - std::pow(a, grid.dim)) / (nu_hi - nu_lo);
      cell_mass[i] += mu * frac;
      deposited += mu * frac;
    }
    if (mu - deposited > 0) cell_mass[n - 1] += mu - deposited;  // clipped by the outer wall
  }
  DensityField u{grid, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) u.values[i] = cell_mass[i] / grid.cell_volume(i);
  const double drift = total_mass(u) - total;
  if (std::abs(drift) > kMassTol)
    throw std::logic_error("deposit_from_pieces: mass drift " + std::to_string(drift));
  if (total > 0) {
    const double scale = total / (total + drift);
    for (auto& x : u.values) x *= scale;
  }
  return u;
}

LagrangianState lagrangian_from_cells(const DensityField& u, int pieces_per_cell) {
  if (u.grid.mode != GridMode::radial)
    throw std::invalid_argument("lagrangian_from_cells: radial grid required");
  const GridSpec& grid = u.grid;
  const std::size_t n = grid.cell_count();
  const double h = grid.spacing();
  const int k = std::max(pieces_per_cell, 1);
  LagrangianState lag;
  lag.masses.resize(n * static_cast<std::size_t>(k));
  lag.edges.resize(lag.masses.size() + 1);
  lag.edges[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = u.values[i] * grid.cell_volume(i);
    const double nu_lo = std::pow(h * static_cast<double>(i), grid.dim);
    const double nu_hi = std::pow(h * static_cast<double>(i + 1), grid.dim);
    for (int s = 0; s < k; ++s) {
      const std::size_t j = i * static_cast<std::size_t>(k) + static_cast<std::size_t>(s);
      lag.masses[j] = mu / k;
      const double nu = nu_lo + (nu_hi - nu_lo) * (s + 1) / k;
      lag.edges[j + 1] = std::pow(nu, 1.0 / grid.dim);
    }
  }
  return lag;
}

double lagrangian_w2_sq(int dim, const LagrangianState& a, std::span<const double> other_edges) {
  if (other_edges.size() != a.edges.size())
    throw std::invalid_argument("lagrangian_w2_sq: edge count mismatch");
  const double inv_dim = 1.0 / dim;
  return par::sum_terms(a.masses.size(), [&](std::size_t j) {
    const double mu = a.masses[j];
    if (mu <= 0) return 0.0;
    const double nu_lo = std::pow(a.edges[j], dim), nu_hi = std::pow(a.edges[j + 1], dim);
    const double pl = std::pow(other_edges[j], dim), ph = std::pow(other_edges[j + 1], dim);
    double w2 = 0;
    for (int q = 0; q < 4; ++q) {
      const double d = Objective::x_of(kGlNode[q], nu_lo, nu_hi, inv_dim) -
                       Objective::x_of(kGlNode[q], pl, ph, inv_dim);
      w2 += kGlWeight[q] * d * d;
    }
    return mu * w2;
  });
}

QuantileStepResult u_step_quantile(const GridSpec& grid, const LagrangianState& base,
                                   const ChemField& v, const ModelParams& p,
                                   const UStepOptions& opts,
                                   const std::vector<double>* warm_edges) {
  if (grid.mode != GridMode::radial)
    throw std::invalid_argument("u_step_quantile: radial grid required");
  require_same_grid(grid, v.grid, "u_step_quantile");
  if (base.edges.size() != base.masses.size() + 1)
    throw std::invalid_argument("u_step_quantile: malformed Lagrangian state");

  std::vector<double> base_pow(base.edges.size());
  for (std::size_t j = 0; j < base.edges.size(); ++j)
    base_pow[j] = std::pow(base.edges[j], grid.dim);

  Objective obj;
  obj.dim = grid.dim;
  obj.m = p.m();
  obj.chi = p.chi;
  obj.inv_2h_chi = 1.0 / (2.0 * p.step * p.chi);
  obj.sigma_d = unit_sphere_area(grid.dim);
  obj.masses = &base.masses;
  obj.base_pow = &base_pow;
  obj.v = LinearInterp{&v.grid, &v.values};

  std::vector<double> y = warm_edges && warm_edges->size() == base.edges.size() ? *warm_edges
                                                                                : base.edges;
  const double r_max = grid.half_width;
  auto project = [&](std::vector<double>& x) {
    isotonic_project(x);
    for (auto& e : x) e = std::min(std::max(e, 0.0), r_max);
  };
  project(y);

  double g_val = obj.value(y);
  std::vector<double> grad, diag, off, dir, y_trial;
  obj.gradient(y, grad);

  QuantileStepResult result;
  result.converged = false;
  double lambda = 0.0;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    obj.hessian(y, diag, off);
    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      if (!newton_direction(diag, off, grad, lambda, dir)) {
        lambda = lambda == 0 ? 1e-8 * (1.0 + par::max_abs(diag)) : 10.0 * lambda;
        continue;
      }
      double t = 1.0;
      for (int bt = 0; bt < 12; ++bt) {
        y_trial = y;
        for (std::size_t j = 0; j < y.size(); ++j) y_trial[j] += t * dir[j];
        project(y_trial);
        const double g_trial = obj.value(y_trial);
        if (g_trial < g_val) {
          const double rel_drop = (g_val - g_trial) / std::max(std::abs(g_val), 1e-300);
          y.swap(y_trial);
          g_val = g_trial;
          accepted = true;
          lambda *= 0.25;
          if (rel_drop < opts.f_rel_tol) result.converged = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted)
        lambda = lambda == 0 ? 1e-8 * (1.0 + par::max_abs(diag)) : 10.0 * lambda;
    }
    if (!accepted) {
      result.converged = true;  // stationary to line-search and damping resolution
      break;
    }
    if (result.converged) break;
    obj.gradient(y, grad);
  }

  result.state.masses = base.masses;
  result.state.edges = std::move(y);
  result.u = deposit_from_pieces(grid, result.state.edges, result.state.masses);
  result.w2_sq = lagrangian_w2_sq(grid.dim, result.state, base.edges);
  result.iterations = it + 1;
  result.objective = g_val;
  return result;
}

UStepResult u_step_quantile(const DensityField& u_prev, const ChemField& v,
                            const ModelParams& p, const UStepOptions& opts) {
  assert_unit_mass(u_prev, "u_step_quantile");
  const auto base = lagrangian_from_cells(u_prev, opts.pieces_per_cell);
  auto res = u_step_quantile(u_prev.grid, base, v, p, opts);
  UStepResult out;
  out.u = std::move(res.u);
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.clipped_mass = res.clipped_mass;
  out.objective = res.objective;
  return out;
}

}  // namespace ksflow
