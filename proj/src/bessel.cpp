#include "ksflow/bessel.hpp"

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "ksflow/elliptic.hpp"
#include "ksflow/fft.hpp"
#include "ksflow/field_io.hpp"
#include "ksflow/par.hpp"

namespace ksflow {

double poisson_constant(int dim) {
  if (dim < 3) throw std::invalid_argument("poisson_constant: d >= 3 required");
  return std::tgamma(0.5 * dim) / (2.0 * (dim - 2) * std::pow(M_PI, 0.5 * dim));
}

double newtonian_kernel_d3(double r) { return 1.0 / (4.0 * M_PI * r); }

double yukawa_kernel_d3(double alpha, double r) {
  return std::exp(-std::sqrt(alpha) * r) / (4.0 * M_PI * r);
}

namespace {

// log integrand of the Laplace-transform representation after s = e^y
inline double log_integrand(double y, double r, double alpha, int dim) {
  const double s = std::exp(y);
  return -0.5 * dim * std::log(4.0 * M_PI) + (1.0 - 0.5 * dim) * y - r * r / (4.0 * s) -
         alpha * s;
}

}  // namespace

double bessel_kernel_value(double alpha, double r, int dim) {
  if (!(r > 0)) throw std::domain_error("bessel_kernel_value: singular point x = 0");
  if (alpha < 0) throw std::invalid_argument("bessel_kernel_value: alpha >= 0 required");
  if (dim < 1) throw std::invalid_argument("bessel_kernel_value: dim >= 1 required");
  if (alpha == 0 && dim <= 2)
    throw std::invalid_argument("bessel_kernel_value: alpha = 0 needs d >= 3");

  // peak of the integrand in y
  double y_star;
  const double c = 1.0 - 0.5 * dim;
  if (alpha > 0) {
    const double e = (c + std::sqrt(c * c + alpha * r * r)) / (2.0 * alpha);
    y_star = std::log(std::max(e, 1e-300));
  } else {
    y_star = std::log(r * r / (4.0 * (-c)));
  }
  const double g_star = log_integrand(y_star, r, alpha, dim);
  // widen until the integrand has dropped ~20 decades
  double lo = y_star, hi = y_star;
  while (log_integrand(lo, r, alpha, dim) > g_star - 46.0 && y_star - lo < 600.0) lo -= 1.0;
  while (log_integrand(hi, r, alpha, dim) > g_star - 46.0 && hi - y_star < 600.0) hi += 1.0;

  auto trapezoid = [&](std::size_t n) {
    const double dy = (hi - lo) / static_cast<double>(n);
    double acc = 0.5 * (std::exp(log_integrand(lo, r, alpha, dim) - g_star) +
                        std::exp(log_integrand(hi, r, alpha, dim) - g_star));
    for (std::size_t i = 1; i < n; ++i)
      acc += std::exp(log_integrand(lo + dy * static_cast<double>(i), r, alpha, dim) - g_star);
    return acc * dy;
  };
  double prev = trapezoid(64);
  for (std::size_t n = 128; n <= 32768; n *= 2) {
    const double cur = trapezoid(n);
    if (std::abs(cur - prev) <= 1e-11 * std::abs(cur)) {
      prev = cur;
      break;
    }
    prev = cur;
  }
  return prev * std::exp(g_star);
}

double shell_mean_kernel(double alpha, double r, double s, int dim) {
  if (dim < 1) throw std::invalid_argument("shell_mean_kernel: dim >= 1 required");
  const double lo = std::min(r, s), hi = std::max(r, s);
  if (hi <= 0) throw std::domain_error("shell_mean_kernel: degenerate radii");
  if (lo < 1e-12 * hi) return bessel_kernel_value(alpha, hi, dim);
  if (dim == 3) {
    if (alpha == 0) return poisson_constant(3) / hi;
    const double k = std::sqrt(alpha);
    return std::exp(-k * hi) * std::sinh(k * lo) / (4.0 * M_PI * k * r * s);
  }
  if (dim == 1) {
    double v = bessel_kernel_value(alpha, r + s, 1);
    if (std::abs(r - s) > 0) v += bessel_kernel_value(alpha, std::abs(r - s), 1);
    return 0.5 * v;  // two-point "sphere"
  }
  // spherical mean: (sigma_{d-1}/sigma_d) int_0^pi Y(sqrt(r^2+s^2-2 r s cos t)) sin^{d-2} t dt
  const double w0 = unit_sphere_area(dim - 1) / unit_sphere_area(dim);
  auto f = [&](double t) {
    const double dist_sq = r * r + s * s - 2.0 * r * s * std::cos(t);
    const double dist = std::sqrt(std::max(dist_sq, 1e-300));
    return bessel_kernel_value(alpha, dist, dim) * std::pow(std::sin(t), dim - 2);
  };
  std::size_t n = 64;
  auto simpson = [&](std::size_t m) {
    const double dt = M_PI / static_cast<double>(m);
    double acc = 0.0;  // endpoints vanish for d>2 via sin^{d-2}; d=2 endpoints bounded when r!=s
    acc += (dim > 2 ? 0.0 : f(1e-9)) + (dim > 2 ? 0.0 : f(M_PI - 1e-9));
    for (std::size_t i = 1; i < m; ++i)
      acc += (i % 2 == 1 ? 4.0 : 2.0) * f(dt * static_cast<double>(i));
    return acc * dt / 3.0;
  };
  double prev = simpson(n);
  for (n = 128; n <= 16384; n *= 2) {
    const double cur = simpson(n);
    if (std::abs(cur - prev) <= 1e-9 * std::abs(cur)) {
      prev = cur;
      break;
    }
    prev = cur;
  }
  return w0 * prev;
}

double kernel_cell_average(double alpha, const GridSpec& grid) {
  const double h = grid.spacing();
  if (grid.mode == GridMode::radial) {
    // innermost shell [0, h]: volume-weighted mean of the shell kernel at r=h/2
    const int n_q = 64;
    double acc = 0.0, wsum = 0.0;
    for (int q = 0; q < n_q; ++q) {
      const double s = (q + 0.5) * h / n_q;
      const double w = std::pow(s, grid.dim - 1);
      acc += w * shell_mean_kernel(alpha, grid.radius(0), s, grid.dim);
      wsum += w;
    }
    return acc / wsum;
  }
  // cube cell: octant with x_a = (h/2) t_a^2 (regularises the corner singularity)
  const int dim = grid.dim;
  const int n_q = 24;
  std::vector<double> node(n_q), wq(n_q);
  for (int i = 0; i < n_q; ++i) {  // midpoint nodes; integrand is only C^0 at t=0 anyway
    node[static_cast<std::size_t>(i)] = (i + 0.5) / n_q;
    wq[static_cast<std::size_t>(i)] = 1.0 / n_q;
  }
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n_q);
  double acc = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    double rsq = 0.0, jac = 1.0;
    for (int a = 0; a < dim; ++a) {
      const double t = node[rest % static_cast<std::size_t>(n_q)];
      const double w = wq[rest % static_cast<std::size_t>(n_q)];
      rest /= static_cast<std::size_t>(n_q);
      const double x = 0.5 * h * t * t;
      rsq += x * x;
      jac *= w * h * t;  // dx = h t dt
    }
    acc += jac * bessel_kernel_value(alpha, std::sqrt(rsq), dim);
  }
  const double octant = acc;                       // integral over [0, h/2]^d
  return octant * std::pow(2.0, dim) / std::pow(h, dim);  // cell mean
}

// ---------------------------------------------------------------------------
// cache

namespace {
std::optional<std::string> g_cache_dir = [] {
  const char* env = std::getenv("KSFLOW_KERNEL_CACHE");
  return env ? std::optional<std::string>(env) : std::nullopt;
}();
std::mutex g_cache_mutex;

std::string table_key(const GridSpec& grid, double alpha, const char* type) {
  std::ostringstream os;
  os << "kernel_" << type << "_m" << static_cast<int>(grid.mode) << "_d" << grid.dim << "_N"
     << grid.points << "_L" << format_double(grid.half_width) << "_a" << format_double(alpha)
     << ".kfld";
  return os.str();
}

std::optional<std::vector<double>> cache_load(const GridSpec& grid, double alpha,
                                              const char* type, std::size_t expected) {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  if (!g_cache_dir) return std::nullopt;
  const auto path = std::filesystem::path(*g_cache_dir) / table_key(grid, alpha, type);
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    auto blob = read_field_blob(path.string());
    if (blob.values.size() != expected) return std::nullopt;
    return std::move(blob.values);
  } catch (const std::exception&) {
    return std::nullopt;  // stale or corrupt cache entry; rebuild
  }
}

void cache_store(const GridSpec& grid, double alpha, const char* type, const GridSpec& shape,
                 std::span<const double> values) {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  if (!g_cache_dir) return;
  std::error_code ec;
  std::filesystem::create_directories(*g_cache_dir, ec);
  const auto path = std::filesystem::path(*g_cache_dir) / table_key(grid, alpha, type);
  try {
    write_field_blob(path.string(), shape, values);
  } catch (const std::exception&) {
    // cache is best-effort
  }
}
}  // namespace

void set_kernel_cache_dir(std::optional<std::string> dir) {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  g_cache_dir = std::move(dir);
}
std::optional<std::string> kernel_cache_dir() {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  return g_cache_dir;
}

// ---------------------------------------------------------------------------
// tables

namespace {
GridSpec padded_grid(const GridSpec& grid) {
  return GridSpec::full_box(grid.dim, 2 * grid.points, 2 * grid.half_width);
}
}  // namespace

KernelTable continuum_kernel_table(const GridSpec& grid, double alpha) {
  KernelTable table{grid, alpha, false, {}};
  if (grid.mode == GridMode::radial) {
    const std::size_t n = grid.cell_count();
    const double h = grid.spacing();
    if (auto cached = cache_load(grid, alpha, "shell", n * n)) {
      table.values = std::move(*cached);
      return table;
    }
    table.values.assign(n * n, 0.0);
    par::for_each(n * n, [&](std::size_t idx) {
      const std::size_t i = idx / n, j = idx % n;
      const double r = grid.radius(i), s = grid.radius(j);
      if (i == j) {
        // average the target row over the source cell (kernel has a kink there)
        const int q = 32;
        double acc = 0.0;
        for (int k = 0; k < q; ++k) {
          const double sq = s - 0.5 * h + (k + 0.5) * h / q;
          acc += shell_mean_kernel(alpha, r, sq, grid.dim);
        }
        table.values[idx] = acc / q;
      } else {
        table.values[idx] = shell_mean_kernel(alpha, r, s, grid.dim);
      }
    });
    cache_store(grid, alpha, "shell", GridSpec::radial(grid.dim, static_cast<int>(n * n), 1.0),
                table.values);
    return table;
  }

  const GridSpec pad = padded_grid(grid);
  const std::size_t n_pad = pad.cell_count();
  if (auto cached = cache_load(grid, alpha, "cont", n_pad)) {
    table.values = std::move(*cached);
    return table;
  }
  table.values.assign(n_pad, 0.0);
  const double h = grid.spacing();
  const int two_n = pad.points;
  const double center = kernel_cell_average(alpha, grid);
  par::for_each(n_pad, [&](std::size_t idx) {
    std::size_t rest = idx;
    double rsq = 0.0;
    for (int a = 0; a < grid.dim; ++a) {
      int o = static_cast<int>(rest % static_cast<std::size_t>(two_n));
      rest /= static_cast<std::size_t>(two_n);
      if (o > grid.points) o -= two_n;  // signed min-image offset
      rsq += (h * o) * (h * o);
    }
    table.values[idx] = rsq == 0 ? center : bessel_kernel_value(alpha, std::sqrt(rsq), grid.dim);
  });
  cache_store(grid, alpha, "cont", pad, table.values);
  return table;
}

namespace {

// FD symbol on the padded periodic lattice
inline double fd_symbol(const GridSpec& pad, std::size_t idx, double h) {
  const int n = pad.points;
  double l = 0.0;
  std::size_t rest = idx;
  for (int a = 0; a < pad.dim; ++a) {
    const int k = static_cast<int>(rest % static_cast<std::size_t>(n));
    rest /= static_cast<std::size_t>(n);
    l += (2.0 - 2.0 * std::cos(2.0 * M_PI * k / n)) / (h * h);
  }
  return l;
}

std::vector<std::complex<double>> to_complex(std::span<const double> x) {
  std::vector<std::complex<double>> c(x.size());
  par::for_each(x.size(), [&](std::size_t i) { c[i] = x[i]; });
  return c;
}

}  // namespace

KernelTable lattice_kernel_table(const GridSpec& grid, double alpha) {
  if (grid.mode != GridMode::full_box)
    throw std::invalid_argument("lattice_kernel_table: full-box grids only");
  if (!(alpha > 0)) throw std::invalid_argument("lattice_kernel_table: alpha > 0 required");
  KernelTable table{grid, alpha, true, {}};
  const GridSpec pad = padded_grid(grid);
  const std::size_t n_pad = pad.cell_count();
  if (auto cached = cache_load(grid, alpha, "latt", n_pad)) {
    table.values = std::move(*cached);
    return table;
  }
  std::vector<std::complex<double>> g(n_pad);
  const double h = grid.spacing();
  par::for_each(n_pad, [&](std::size_t i) { g[i] = 1.0 / (fd_symbol(pad, i, h) + alpha); });
  std::vector<std::size_t> dims(static_cast<std::size_t>(pad.dim),
                                static_cast<std::size_t>(pad.points));
  fft::transform_nd(g, dims, true);
  table.values.resize(n_pad);
  const double inv_vol = 1.0 / std::pow(h, grid.dim);  // continuum convolution convention
  par::for_each(n_pad, [&](std::size_t i) { table.values[i] = g[i].real() * inv_vol; });
  cache_store(grid, alpha, "latt", pad, table.values);
  return table;
}

// ---------------------------------------------------------------------------
// apply

namespace {

// flat index in the padded array of the physical cell with the same per-axis
// coordinates
inline std::size_t padded_index(const GridSpec& grid, const GridSpec& pad, std::size_t idx) {
  const int n = grid.points;
  int coords[3] = {0, 0, 0};
  std::size_t rest = idx;
  for (int a = grid.dim - 1; a >= 0; --a) {
    coords[a] = static_cast<int>(rest % static_cast<std::size_t>(n));
    rest /= static_cast<std::size_t>(n);
  }
  std::size_t pad_idx = 0, stride = 1;
  for (int a = grid.dim - 1; a >= 0; --a) {
    pad_idx += static_cast<std::size_t>(coords[a]) * stride;
    stride *= static_cast<std::size_t>(pad.points);
  }
  return pad_idx;
}

std::vector<double> zero_pad(const GridSpec& grid, std::span<const double> u,
                             const GridSpec& pad) {
  std::vector<double> out(pad.cell_count(), 0.0);
  par::for_each(grid.cell_count(),
                [&](std::size_t idx) { out[padded_index(grid, pad, idx)] = u[idx]; });
  return out;
}

std::vector<double> restrict_padded(const GridSpec& grid, std::span<const double> padded,
                                    const GridSpec& pad) {
  std::vector<double> out(grid.cell_count());
  par::for_each(grid.cell_count(),
                [&](std::size_t idx) { out[idx] = padded[padded_index(grid, pad, idx)]; });
  return out;
}

// padded solution of the free-space emulation on the box
std::vector<double> box_bessel_padded(const GridSpec& grid, std::span<const double> u,
                                      double alpha) {
  const GridSpec pad = padded_grid(grid);
  auto u_pad = zero_pad(grid, u, pad);
  auto spec = to_complex(u_pad);
  std::vector<std::size_t> dims(static_cast<std::size_t>(pad.dim),
                                static_cast<std::size_t>(pad.points));
  fft::transform_nd(spec, dims, false);
  const double h = grid.spacing();
  if (alpha > 0) {
    par::for_each(spec.size(), [&](std::size_t i) { spec[i] /= fd_symbol(pad, i, h) + alpha; });
  } else {
    // Hockney: convolve with the tabulated continuum Newtonian kernel
    auto table = continuum_kernel_table(grid, 0.0);
    auto ghat = to_complex(table.values);
    fft::transform_nd(ghat, dims, false);
    const double vol = std::pow(h, grid.dim);
    par::for_each(spec.size(), [&](std::size_t i) { spec[i] *= ghat[i] * vol; });
  }
  fft::transform_nd(spec, dims, true);
  std::vector<double> out(spec.size());
  par::for_each(spec.size(), [&](std::size_t i) { out[i] = spec[i].real(); });
  return out;
}

// radial free-space solve on [0, 2L]; returns the extended solution
std::vector<double> radial_bessel_extended(const GridSpec& grid, std::span<const double> u,
                                           double alpha, GridSpec& ext_out) {
  const GridSpec ext = GridSpec::radial(grid.dim, 2 * grid.points, 2.0 * grid.half_width);
  ext_out = ext;
  std::vector<double> rhs(ext.cell_count(), 0.0);
  for (std::size_t i = 0; i < grid.cell_count(); ++i) rhs[i] = u[i];
  const double mass = total_mass(grid, u);
  const double r_ghost = ext.radius(ext.cell_count());  // one cell beyond 2L
  double ghost = 0.0;
  if (alpha == 0) {
    if (grid.dim >= 3) ghost = mass * poisson_constant(grid.dim) * std::pow(r_ghost, 2 - grid.dim);
  } else if (grid.dim == 3) {
    double acc = 0.0;  // exact shell superposition in d = 3
    for (std::size_t j = 0; j < grid.cell_count(); ++j)
      acc += u[j] * grid.cell_volume(j) * shell_mean_kernel(alpha, r_ghost, grid.radius(j), 3);
    ghost = acc;
  } else {
    ghost = mass * bessel_kernel_value(alpha, r_ghost, grid.dim);  // monopole closure
  }
  return solve_radial(ext, alpha, rhs, RadialOuterBC::dirichlet_ghost, ghost);
}

}  // namespace

ChemField apply_bessel(const GridSpec& grid, std::span<const double> u, double alpha) {
  if (alpha < 0) throw std::invalid_argument("apply_bessel: alpha >= 0 required");
  if (u.size() != grid.cell_count()) throw std::invalid_argument("apply_bessel: size mismatch");
  if (alpha == 0 && grid.dim <= 2)
    throw std::invalid_argument("apply_bessel: Newtonian kernel needs d >= 3");
  if (grid.mode == GridMode::radial) {
    GridSpec ext;
    auto sol = radial_bessel_extended(grid, u, alpha, ext);
    return ChemField{grid, std::vector<double>(sol.begin(),
                                               sol.begin() + static_cast<std::ptrdiff_t>(
                                                                 grid.cell_count()))};
  }
  const GridSpec pad = padded_grid(grid);
  auto sol = box_bessel_padded(grid, u, alpha);
  return ChemField{grid, restrict_padded(grid, sol, pad)};
}

ChemField apply_bessel(const DensityField& u, double alpha) {
  return apply_bessel(u.grid, u.values, alpha);
}

double kernel_identity_residual(const GridSpec& grid, std::span<const double> u, double alpha) {
  double num = 0.0, den = 0.0;
  if (grid.mode == GridMode::radial) {
    GridSpec ext;
    auto sol = radial_bessel_extended(grid, u, alpha, ext);
    const double h = ext.spacing();
    num = par::sum_terms(grid.cell_count(), [&](std::size_t i) {
      const double w = ext.cell_volume(i);
      double flux = ext.face_area(i + 1) * (sol[i + 1] - sol[i]) / h;
      if (i > 0) flux -= ext.face_area(i) * (sol[i] - sol[i - 1]) / h;
      const double r = alpha * sol[i] - flux / w - u[i];
      return r * r * w;
    });
  } else {
    const GridSpec pad = padded_grid(grid);
    auto sol = box_bessel_padded(grid, u, alpha);
    auto u_pad = zero_pad(grid, u, pad);
    const double h = grid.spacing();
    const int n = pad.points;
    std::size_t strides[3] = {1, 1, 1};
    for (int a = pad.dim - 1, s = 1; a >= 0; --a) {
      strides[static_cast<std::size_t>(a)] = static_cast<std::size_t>(s);
      s *= n;
    }
    std::vector<double> resid(pad.cell_count());
    par::for_each(pad.cell_count(), [&](std::size_t i) {
      double lap = 0.0;
      std::size_t rest = i;
      int coords[3] = {0, 0, 0};
      for (int a = pad.dim - 1; a >= 0; --a) {
        coords[static_cast<std::size_t>(a)] = static_cast<int>(rest % static_cast<std::size_t>(n));
        rest /= static_cast<std::size_t>(n);
      }
      for (int a = 0; a < pad.dim; ++a) {
        const std::size_t st = strides[static_cast<std::size_t>(a)];
        const int c = coords[static_cast<std::size_t>(a)];
        const std::size_t ip = c + 1 < n ? i + st : i - static_cast<std::size_t>(n - 1) * st;
        const std::size_t im = c > 0 ? i - st : i + static_cast<std::size_t>(n - 1) * st;
        lap += sol[ip] + sol[im] - 2.0 * sol[i];
      }
      resid[i] = alpha * sol[i] - lap / (h * h) - u_pad[i];
    });
    // norm over the physical cells only
    auto r_phys = restrict_padded(grid, resid, pad);
    num = par::sum_terms(grid.cell_count(), [&](std::size_t i) {
      return r_phys[i] * r_phys[i] * grid.cell_volume(i);
    });
  }
  den = par::sum_terms(grid.cell_count(), [&](std::size_t i) {
    return u[i] * u[i] * grid.cell_volume(i);
  });
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

double interaction_integral(const GridSpec& grid, std::span<const double> u, double alpha) {
  const auto s = apply_bessel(grid, u, alpha);
  return par::sum_terms(grid.cell_count(), [&](std::size_t i) {
    return u[i] * s.values[i] * grid.cell_volume(i);
  });
}

}  // namespace ksflow
