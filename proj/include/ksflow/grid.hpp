#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ksflow {

enum class GridMode : std::uint8_t { full_box = 0, radial = 1 };

// Surface area of the unit sphere in R^d.
inline double unit_sphere_area(int dim) {
  if (dim < 1) throw std::invalid_argument("unit_sphere_area: dim >= 1 required");
  return 2.0 * std::pow(M_PI, 0.5 * dim) / std::tgamma(0.5 * dim);
}

// Uniform truncation of R^d: either the box [-L, L]^d with N cells per axis,
// or the radial ball r in [0, L] with N shells and volume element
// sigma_d r^{d-1} dr. All integrals are midpoint sums on cell centers.
struct GridSpec {
  GridMode mode = GridMode::radial;
  int dim = 3;
  int points = 256;       // cells per axis (full box) / radial cells
  double half_width = 8;  // L

  static constexpr std::size_t kMaxCells = std::size_t{1} << 26;

  static GridSpec full_box(int dim, int points, double half_width) {
    GridSpec g{GridMode::full_box, dim, points, half_width};
    g.validate();
    return g;
  }
  static GridSpec radial(int dim, int points, double half_width) {
    GridSpec g{GridMode::radial, dim, points, half_width};
    g.validate();
    return g;
  }

  void validate() const {
    if (dim < 1) throw std::invalid_argument("GridSpec: dim >= 1 required");
    if (points < 8) throw std::invalid_argument("GridSpec: N >= 8 required");
    if (!(half_width > 0)) throw std::invalid_argument("GridSpec: L > 0 required");
    if (mode == GridMode::full_box) {
      if ((points & (points - 1)) != 0)
        throw std::invalid_argument("GridSpec: full-box N must be a power of two");
      double cells = std::pow(static_cast<double>(points), dim);
      if (cells > static_cast<double>(kMaxCells))
        throw std::length_error("GridSpec: N^d exceeds the cell budget (" +
                                std::to_string(kMaxCells) + ")");
    }
  }

  std::size_t cell_count() const {
    if (mode == GridMode::radial) return static_cast<std::size_t>(points);
    std::size_t c = 1;
    for (int a = 0; a < dim; ++a) c *= static_cast<std::size_t>(points);
    return c;
  }

  // Mesh width: 2L/N on the box, L/N in radius.
  double spacing() const {
    return mode == GridMode::full_box ? 2.0 * half_width / points : half_width / points;
  }

  double domain_diameter() const {
    return mode == GridMode::full_box ? 2.0 * half_width * std::sqrt(double(dim))
                                      : 2.0 * half_width;
  }

  // Radial cell center radius.
  double radius(std::size_t i) const { return (static_cast<double>(i) + 0.5) * spacing(); }

  // Full-box: per-axis index of a flat row-major cell index.
  std::array<int, 3> unflatten(std::size_t idx) const {
    std::array<int, 3> ix{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      ix[static_cast<std::size_t>(a)] = static_cast<int>(idx % points);
      idx /= points;
    }
    return ix;
  }

  std::array<double, 3> cell_center(std::size_t idx) const {
    std::array<double, 3> x{0, 0, 0};
    if (mode == GridMode::radial) {
      x[0] = radius(idx);
      return x;
    }
    const auto ix = unflatten(idx);
    const double h = spacing();
    for (int a = 0; a < dim; ++a)
      x[static_cast<std::size_t>(a)] = -half_width + (ix[static_cast<std::size_t>(a)] + 0.5) * h;
    return x;
  }

  double radius_sq(std::size_t idx) const {
    if (mode == GridMode::radial) {
      const double r = radius(idx);
      return r * r;
    }
    const auto x = cell_center(idx);
    double s = 0;
    for (int a = 0; a < dim; ++a) s += x[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
    return s;
  }

  double cell_volume(std::size_t idx) const {
    const double h = spacing();
    if (mode == GridMode::full_box) return std::pow(h, dim);
    const double r = radius(idx);
    return unit_sphere_area(dim) * std::pow(r, dim - 1) * h;
  }

  // sigma_d r^{d-1} at a shell face (radial mode).
  double face_area(std::size_t face) const {
    const double r = static_cast<double>(face) * spacing();
    return unit_sphere_area(dim) * std::pow(r, dim - 1);
  }

  bool operator==(const GridSpec& o) const {
    return mode == o.mode && dim == o.dim && points == o.points && half_width == o.half_width;
  }
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where) {
  if (!(a == b)) throw std::invalid_argument(std::string(where) + ": grids differ");
}

}  // namespace ksflow
