#pragma once

#include <cmath>
#include <vector>

#include "ksflow/grid.hpp"
#include "ksflow/par.hpp"

// Log-domain kernel contractions shared by the entropic transport solvers:
// dense quadratic-cost kernels on a coordinate line and separable axis sweeps
// on full-box grids.
namespace ksflow::detail {

// out_k = LSE_j ( phi_j - (x_k - y_j)^2 / eps )
inline void lse_dense(const std::vector<double>& phi, const std::vector<double>& x,
                      const std::vector<double>& y, double eps, std::vector<double>& out) {
  const std::size_t n_out = x.size(), n_in = y.size();
  out.assign(n_out, -HUGE_VAL);
  par::for_each(n_out, [&](std::size_t k) {
    double best = -HUGE_VAL;
    for (std::size_t j = 0; j < n_in; ++j) {
      const double d = x[k] - y[j];
      const double t = phi[j] - d * d / eps;
      if (t > best) best = t;
    }
    if (best == -HUGE_VAL) return;
    double acc = 0.0;
    for (std::size_t j = 0; j < n_in; ++j) {
      const double d = x[k] - y[j];
      acc += std::exp(phi[j] - d * d / eps - best);
    }
    out[k] = best + std::log(acc);
  });
}

// separable sweep over the axes of a row-major full-box array
inline void lse_separable(std::vector<double> phi, const GridSpec& grid, double eps,
                          std::vector<double>& out) {
  const int N = grid.points;
  const double h = grid.spacing();
  std::vector<double> lk(static_cast<std::size_t>(N) * N);
  for (int k = 0; k < N; ++k)
    for (int j = 0; j < N; ++j) {
      const double d = h * (k - j);
      lk[static_cast<std::size_t>(k) * N + j] = -d * d / eps;
    }
  const std::size_t total = grid.cell_count();
  std::vector<double> next(total);
  for (int ax = grid.dim - 1; ax >= 0; --ax) {
    std::size_t stride = 1;
    for (int a = grid.dim - 1; a > ax; --a) stride *= static_cast<std::size_t>(N);
    const std::size_t inner = stride;
    const std::size_t lines = total / static_cast<std::size_t>(N);
    par::for_each(lines, [&](std::size_t l) {
      const std::size_t o = l / inner;
      const std::size_t r = l % inner;
      const std::size_t base = o * static_cast<std::size_t>(N) * inner + r;
      for (int k = 0; k < N; ++k) {
        const double* row = lk.data() + static_cast<std::size_t>(k) * N;
        double best = -HUGE_VAL;
        for (int j = 0; j < N; ++j) {
          const double t = phi[base + static_cast<std::size_t>(j) * stride] + row[j];
          if (t > best) best = t;
        }
        double acc = 0.0;
        if (best != -HUGE_VAL) {
          for (int j = 0; j < N; ++j)
            acc += std::exp(phi[base + static_cast<std::size_t>(j) * stride] + row[j] - best);
        }
        next[base + static_cast<std::size_t>(k) * stride] =
            best == -HUGE_VAL ? -HUGE_VAL : best + std::log(acc);
      }
    });
    phi.swap(next);
  }
  out = std::move(phi);
}

// Quadratic-cost kernel operator in log domain.
// apply(g, log_w): out = LSE_y[ log_w(y) + g(y)/eps - C(.,y)/eps ], scaled by -eps.
struct LogKernel {
  const GridSpec* grid = nullptr;
  bool dense = false;
  std::vector<double> positions;  // dense mode only

  static LogKernel for_grid(const GridSpec& grid) {
    LogKernel k;
    k.grid = &grid;
    k.dense = grid.mode == GridMode::radial || grid.dim == 1;
    if (k.dense) {
      k.positions.resize(grid.cell_count());
      for (std::size_t i = 0; i < k.positions.size(); ++i)
        k.positions[i] = grid.mode == GridMode::radial ? grid.radius(i)
                                                       : grid.cell_center(i)[0];
    }
    return k;
  }

  void apply(const std::vector<double>& g, const std::vector<double>& log_w, double eps,
             std::vector<double>& out) const {
    std::vector<double> phi(g.size());
    par::for_each(g.size(), [&](std::size_t i) {
      phi[i] = (log_w.empty() ? 0.0 : log_w[i]) + g[i] / eps;
    });
    if (dense) {
      lse_dense(phi, positions, positions, eps, out);
    } else {
      lse_separable(std::move(phi), *grid, eps, out);
    }
    par::for_each(out.size(), [&](std::size_t i) { out[i] = -eps * out[i]; });
  }
};

}  // namespace ksflow::detail
