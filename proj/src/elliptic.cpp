#include "ksflow/elliptic.hpp"

#include <cmath>
#include <stdexcept>

#include "ksflow/fft.hpp"
#include "ksflow/par.hpp"

namespace ksflow {

namespace {

// neighbour index along axis `ax` (+/- 1) or itself when the face is a wall
inline std::size_t box_neighbor(const GridSpec& g, std::size_t idx, int ax, int dir,
                                bool& wall) {
  const int n = g.points;
  std::size_t stride = 1;
  for (int a = g.dim - 1; a > ax; --a) stride *= static_cast<std::size_t>(n);
  const int coord = static_cast<int>((idx / stride) % static_cast<std::size_t>(n));
  const int next = coord + dir;
  if (next < 0 || next >= n) {
    wall = true;
    return idx;
  }
  wall = false;
  return dir > 0 ? idx + stride : idx - stride;
}

}  // namespace

std::vector<double> apply_laplacian_noflux(const GridSpec& grid, std::span<const double> v) {
  const std::size_t n = grid.cell_count();
  if (v.size() != n) throw std::invalid_argument("apply_laplacian_noflux: size mismatch");
  std::vector<double> out(n, 0.0);
  const double h = grid.spacing();
  if (grid.mode == GridMode::full_box) {
    const double inv_h2 = 1.0 / (h * h);
    par::for_each(n, [&](std::size_t i) {
      double acc = 0.0;
      for (int ax = 0; ax < grid.dim; ++ax) {
        bool wall = false;
        const std::size_t ip = box_neighbor(grid, i, ax, +1, wall);
        if (!wall) acc += v[ip] - v[i];
        const std::size_t im = box_neighbor(grid, i, ax, -1, wall);
        if (!wall) acc += v[im] - v[i];
      }
      out[i] = acc * inv_h2;
    });
    return out;
  }
  // radial divergence form: (1/w_i) [A_{i+1}(v_{i+1}-v_i) - A_i(v_i-v_{i-1})] / h
  par::for_each(n, [&](std::size_t i) {
    const double w = grid.cell_volume(i);
    double flux = 0.0;
    if (i + 1 < n) flux += grid.face_area(i + 1) * (v[i + 1] - v[i]) / h;
    if (i > 0) flux -= grid.face_area(i) * (v[i] - v[i - 1]) / h;
    out[i] = flux / w;
  });
  return out;
}

double grad_norm_sq(const GridSpec& grid, std::span<const double> v) {
  const std::size_t n = grid.cell_count();
  if (v.size() != n) throw std::invalid_argument("grad_norm_sq: size mismatch");
  const double h = grid.spacing();
  if (grid.mode == GridMode::radial) {
    return par::sum_terms(n - 1, [&](std::size_t f) {
      const double dv = (v[f + 1] - v[f]) / h;
      return grid.face_area(f + 1) * dv * dv * h;
    });
  }
  const double vol = std::pow(h, grid.dim);
  return par::sum_terms(n, [&](std::size_t i) {
    double acc = 0.0;
    for (int ax = 0; ax < grid.dim; ++ax) {
      bool wall = false;
      const std::size_t ip = box_neighbor(grid, i, ax, +1, wall);
      if (!wall) {
        const double dv = (v[ip] - v[i]) / h;
        acc += dv * dv;
      }
    }
    return acc * vol;
  });
}

std::vector<double> solve_radial(const GridSpec& grid, double zeta, std::span<const double> rhs,
                                 RadialOuterBC bc, double ghost_value) {
  if (grid.mode != GridMode::radial) throw std::invalid_argument("solve_radial: radial grid required");
  const std::size_t n = grid.cell_count();
  if (rhs.size() != n) throw std::invalid_argument("solve_radial: size mismatch");
  const double h = grid.spacing();
  // symmetric tridiagonal system  M v = w .* rhs  (rows scaled by cell volume)
  std::vector<double> diag(n), lower(n, 0.0), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = grid.cell_volume(i);
    double d = zeta * w + grid.face_area(i) / h + grid.face_area(i + 1) / h;
    if (i == 0) d = zeta * w + grid.face_area(1) / h;  // A_0 = 0 anyway (r=0)
    b[i] = w * rhs[i];
    if (i > 0) lower[i] = -grid.face_area(i) / h;
    if (i + 1 == n) {
      if (bc == RadialOuterBC::no_flux) {
        d = zeta * w + grid.face_area(i) / h;
      } else {
        b[i] += (grid.face_area(i + 1) / h) * ghost_value;
      }
    }
    diag[i] = d;
  }
  if (zeta <= 0 && bc == RadialOuterBC::no_flux) {
    if (zeta < 0) throw std::invalid_argument("solve_radial: zeta >= 0 required");
    double mean = par::sum_terms(n, [&](std::size_t i) { return rhs[i] * grid.cell_volume(i); });
    double scale = par::sum_terms(n, [&](std::size_t i) {
      return std::abs(rhs[i]) * grid.cell_volume(i);
    });
    if (std::abs(mean) > 1e-10 * std::max(scale, 1e-300))
      throw std::invalid_argument("solve_radial: singular operator with non-zero-mean rhs");
    diag[0] += 1.0;  // pin, then re-project to mean zero below
  }
  // Thomas
  std::vector<double> cp(n), dp(n), v(n);
  cp[0] = -grid.face_area(1) / h / diag[0];
  dp[0] = b[0] / diag[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double m = diag[i] - lower[i] * cp[i - 1];
    cp[i] = i + 1 < n ? -grid.face_area(i + 1) / h / m : 0.0;
    dp[i] = (b[i] - lower[i] * dp[i - 1]) / m;
  }
  v[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) v[i] = dp[i] - cp[i] * v[i + 1];
  if (zeta <= 0 && bc == RadialOuterBC::no_flux) {
    const double vol = par::sum_terms(n, [&](std::size_t i) { return grid.cell_volume(i); });
    const double mean = par::sum_terms(n, [&](std::size_t i) {
      return v[i] * grid.cell_volume(i);
    }) / vol;
    for (auto& x : v) x -= mean;
  }
  return v;
}

std::vector<double> solve_noflux(const GridSpec& grid, double zeta, std::span<const double> rhs) {
  const std::size_t n = grid.cell_count();
  if (rhs.size() != n) throw std::invalid_argument("solve_noflux: size mismatch");
  if (zeta < 0) throw std::invalid_argument("solve_noflux: zeta >= 0 required");
  if (grid.mode == GridMode::radial)
    return solve_radial(grid, zeta, rhs, RadialOuterBC::no_flux, 0.0);

  if (zeta == 0) {
    const double mean = par::sum_terms(n, [&](std::size_t i) { return rhs[i]; });
    double scale = par::sum_terms(n, [&](std::size_t i) { return std::abs(rhs[i]); });
    if (std::abs(mean) > 1e-10 * std::max(scale, 1e-300))
      throw std::invalid_argument("solve_noflux: singular operator with non-zero-mean rhs");
  }
  std::vector<double> a(rhs.begin(), rhs.end());
  std::vector<std::size_t> dims(static_cast<std::size_t>(grid.dim),
                                static_cast<std::size_t>(grid.points));
  fft::dct2_nd(a, dims);
  const double h = grid.spacing();
  const int N = grid.points;
  std::vector<double> lam(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k)
    lam[static_cast<std::size_t>(k)] = (2.0 - 2.0 * std::cos(M_PI * k / N)) / (h * h);
  par::for_each(n, [&](std::size_t idx) {
    double l = zeta;
    std::size_t rest = idx;
    for (int ax = grid.dim - 1; ax >= 0; --ax) {
      l += lam[rest % static_cast<std::size_t>(N)];
      rest /= static_cast<std::size_t>(N);
    }
    a[idx] = l > 0 ? a[idx] / l : 0.0;  // zeta==0: drop the constant mode
  });
  fft::dct3_nd(a, dims);
  return a;
}

ChemField elliptic_solve(const GridSpec& grid, std::span<const double> rhs, double alpha,
                         double kappa) {
  if (alpha < 0 || kappa < 0)
    throw std::invalid_argument("elliptic_solve: alpha, kappa >= 0 required");
  return ChemField{grid, solve_noflux(grid, alpha + kappa, rhs)};
}

double noflux_residual(const GridSpec& grid, double zeta, std::span<const double> w,
                       std::span<const double> rhs) {
  const auto lap = apply_laplacian_noflux(grid, w);
  const double num = par::sum_terms(w.size(), [&](std::size_t i) {
    const double r = zeta * w[i] - lap[i] - rhs[i];
    return r * r * grid.cell_volume(i);
  });
  const double den = par::sum_terms(w.size(), [&](std::size_t i) {
    return rhs[i] * rhs[i] * grid.cell_volume(i);
  });
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

std::vector<double> gradient_magnitude(const GridSpec& grid, std::span<const double> v) {
  const std::size_t n = grid.cell_count();
  std::vector<double> out(n, 0.0);
  const double h = grid.spacing();
  if (grid.mode == GridMode::radial) {
    par::for_each(n, [&](std::size_t i) {
      double g;
      if (i == 0)
        g = (v[1] - v[0]) / h;
      else if (i + 1 == n)
        g = (v[i] - v[i - 1]) / h;
      else
        g = (v[i + 1] - v[i - 1]) / (2 * h);
      out[i] = std::abs(g);
    });
    return out;
  }
  par::for_each(n, [&](std::size_t i) {
    double acc = 0.0;
    for (int ax = 0; ax < grid.dim; ++ax) {
      bool wall_p = false, wall_m = false;
      const std::size_t ip = box_neighbor(grid, i, ax, +1, wall_p);
      const std::size_t im = box_neighbor(grid, i, ax, -1, wall_m);
      double g;
      if (!wall_p && !wall_m)
        g = (v[ip] - v[im]) / (2 * h);
      else if (!wall_p)
        g = (v[ip] - v[i]) / h;
      else if (!wall_m)
        g = (v[i] - v[im]) / h;
      else
        g = 0.0;
      acc += g * g;
    }
    out[i] = std::sqrt(acc);
  });
  return out;
}

}  // namespace ksflow
