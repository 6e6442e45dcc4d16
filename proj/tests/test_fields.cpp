#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ksflow/field.hpp"
#include "ksflow/field_io.hpp"
#include "ksflow/model.hpp"

using namespace ksflow;

namespace {
// closed-form L^p norm of a unit-mass d-dim Gaussian: (int G^p)^{1/p},
// int G^p = p^{-d/2} (2 pi sigma^2)^{d(1-p)/2}
double gaussian_lp(double sigma, double p, int d) {
  return std::pow(std::pow(p, -0.5 * d) * std::pow(2 * M_PI * sigma * sigma, 0.5 * d * (1 - p)),
                  1.0 / p);
}
}  // namespace

TEST_CASE("grid invariants are enforced") {
  CHECK_THROWS_AS(GridSpec::full_box(3, 7, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec::full_box(3, 48, 1.0), std::invalid_argument);  // not a power of two
  CHECK_THROWS_AS(GridSpec::radial(3, 8, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(GridSpec::full_box(3, 1024, 1.0), std::length_error);  // 2^30 cells
  CHECK(GridSpec::radial(3, 8, 1.0).cell_count() == 8);
}

TEST_CASE("lp_norm: uniform density on a unit-volume box") {
  // [-0.5, 0.5]^3 has volume 1; a unit density has mass 1 and every L^p norm 1
  const auto g = GridSpec::full_box(3, 8, 0.5);
  DensityField u{g, std::vector<double>(g.cell_count(), 1.0)};
  CHECK(lp_norm(u, 1.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(lp_norm(u, 2.0 - 2.0 / 3.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(lp_norm(u, 5.0) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("lp_norm: discretised Gaussian matches the analytic moment") {
  const auto g = GridSpec::full_box(3, 64, 8.0);
  const auto u = gaussian_density(g, 0.5);
  const double m = 4.0 / 3.0;
  CHECK(lp_norm(u, m) == doctest::Approx(gaussian_lp(0.5, m, 3)).epsilon(1e-4));
  CHECK(lp_norm(u, 2.0) == doctest::Approx(gaussian_lp(0.5, 2.0, 3)).epsilon(1e-4));
}

TEST_CASE("lp_norm is positively homogeneous") {
  const auto g = GridSpec::radial(3, 64, 4.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(0.0, 2.0);
  std::vector<double> f(g.cell_count());
  for (auto& x : f) x = dist(rng);
  for (double c : {0.25, 3.0, 117.0}) {
    std::vector<double> cf(f);
    for (auto& x : cf) x *= c;
    for (double p : {1.0, 4.0 / 3.0, 2.0}) {
      CHECK(lp_norm(g, cf, p) == doctest::Approx(c * lp_norm(g, f, p)).epsilon(1e-14));
    }
  }
}

TEST_CASE("lp_norm rejects non-finite values with a location") {
  const auto g = GridSpec::radial(3, 8, 1.0);
  std::vector<double> f(g.cell_count(), 1.0);
  f[3] = std::nan("");
  CHECK_THROWS_WITH_AS(lp_norm(g, f, 2.0), doctest::Contains("cell 3"), std::domain_error);
}

TEST_CASE("second moment: origin cell, Gaussian, parallel-axis identity") {
  const auto g = GridSpec::radial(3, 64, 8.0);
  DensityField point{g, std::vector<double>(g.cell_count(), 0.0)};
  point.values[0] = 1.0 / g.cell_volume(0);
  const double r0 = g.radius(0);
  CHECK(second_moment(point) == doctest::Approx(r0 * r0).epsilon(1e-13));

  const auto u = gaussian_density(g, 0.5);
  CHECK(second_moment(u) == doctest::Approx(3 * 0.25).epsilon(1e-3));

  // lattice translation: moment(u shifted by a) = moment(u) + |a|^2 + 2 a . mean
  const auto gb = GridSpec::full_box(2, 32, 4.0);
  auto ub = gaussian_density(gb, 0.4);
  const int shift = 3;
  DensityField shifted{gb, std::vector<double>(gb.cell_count(), 0.0)};
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32 - shift; ++j)
      shifted.values[static_cast<std::size_t>(i) * 32 + j + shift] =
          ub.values[static_cast<std::size_t>(i) * 32 + j];
  const double lost = 1.0 - total_mass(shifted);
  REQUIRE(std::abs(lost) < 1e-12);  // bump fits; nothing crossed the wall
  double mean_y = 0;
  for (std::size_t i = 0; i < gb.cell_count(); ++i)
    mean_y += gb.cell_center(i)[1] * ub.values[i] * gb.cell_volume(i);
  const double a = shift * gb.spacing();
  CHECK(second_moment(shifted) ==
        doctest::Approx(second_moment(ub) + a * a + 2 * a * mean_y).epsilon(1e-11));
}

TEST_CASE("Boltzmann entropy: uniform profiles and the Gaussian closed form") {
  const auto g1 = GridSpec::full_box(3, 8, 0.5);
  DensityField uniform{g1, std::vector<double>(g1.cell_count(), 1.0)};
  CHECK(boltzmann_entropy(uniform) == doctest::Approx(0.0).epsilon(1e-14));

  const auto g2 = GridSpec::full_box(3, 8, 1.0);  // volume 8
  DensityField u2{g2, std::vector<double>(g2.cell_count(), 1.0 / 8.0)};
  CHECK(boltzmann_entropy(u2) == doctest::Approx(-std::log(8.0)).epsilon(1e-13));

  const auto g3 = GridSpec::radial(3, 256, 8.0);
  const auto u3 = gaussian_density(g3, 0.5);
  const double expected = -1.5 * std::log(2 * M_PI * 0.25 * M_E);
  CHECK(boltzmann_entropy(u3) == doctest::Approx(expected).epsilon(1e-3));

  DensityField vac{g3, std::vector<double>(g3.cell_count(), 0.0)};
  vac.values[10] = 1.0 / g3.cell_volume(10);
  CHECK(std::isfinite(boltzmann_entropy(vac)));  // 0 ln 0 convention
}

TEST_CASE("entropy lower bound H[u] >= -C3 - int (1+|x|^2) u") {
  const auto g = GridSpec::radial(3, 128, 8.0);
  double c3 = 0;
  for (std::size_t i = 0; i < g.cell_count(); ++i)
    c3 += std::exp(-2.0 - g.radius_sq(i)) * g.cell_volume(i);
  for (double sigma : {0.2, 0.5, 1.5}) {
    const auto u = gaussian_density(g, sigma);
    double weighted = 0;
    for (std::size_t i = 0; i < g.cell_count(); ++i)
      weighted += (1.0 + g.radius_sq(i)) * u.values[i] * g.cell_volume(i);
    CHECK(boltzmann_entropy(u) >= -c3 - weighted - 1e-12);
  }
}

TEST_CASE("radial and full-box reductions agree for radially symmetric data") {
  const auto gr = GridSpec::radial(3, 64, 8.0);
  const auto gb = GridSpec::full_box(3, 64, 8.0);
  const auto ur = gaussian_density(gr, 0.5);
  const auto ub = gaussian_density(gb, 0.5);
  const double m = 4.0 / 3.0;
  CHECK(lp_norm(ur, m) == doctest::Approx(lp_norm(ub, m)).epsilon(0.01));
  CHECK(second_moment(ur) == doctest::Approx(second_moment(ub)).epsilon(0.01));
  CHECK(boltzmann_entropy(ur) == doctest::Approx(boltzmann_entropy(ub)).epsilon(0.01));
}

TEST_CASE("rescale_physical implements the nondimensionalisation") {
  const auto unit = rescale_physical(1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 3);
  CHECK(unit.chi == doctest::Approx(1.0));

  const auto zero_alpha = rescale_physical(5.0, 2.0, 3.0, 1.0, 0.0, 1.0, 4);
  CHECK(zero_alpha.alpha == 0.0);

  const auto scaled = rescale_physical(8.0, 2.0, 1.0, 1.0, 0.0, 1.0, 3);
  CHECK(scaled.chi == doctest::Approx(2.0 * std::pow(8.0, 2.0 / 3.0)).epsilon(1e-14));
  CHECK(scaled.chi == doctest::Approx(8.0).epsilon(1e-14));

  CHECK_THROWS_AS(rescale_physical(1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 2), std::invalid_argument);
}

TEST_CASE("ModelParams ties m to the dimension and flags exploratory runs") {
  ModelParams p;
  p.dim = 3;
  CHECK(p.m() == doctest::Approx(4.0 / 3.0));
  p.dim = 5;
  CHECK(p.m() == doctest::Approx(1.6));
  CHECK(p.m() > 1.0);
  CHECK(p.m() < 2.0);
  p.dim = 2;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  ModelParams q;
  q.c_hls = 2.0;
  q.chi = q.chi_c() * 1.5;
  CHECK(q.exploratory());
  q.chi = q.chi_c() * 0.5;
  CHECK(!q.exploratory());
}

TEST_CASE("field blob round-trips bit-exactly") {
  const auto g = GridSpec::radial(4, 32, 2.5);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-5, 5);
  std::vector<double> f(g.cell_count());
  for (auto& x : f) x = dist(rng);
  std::stringstream buf;
  write_field_blob(buf, g, f);
  const auto blob = read_field_blob(buf);
  CHECK(blob.grid == g);
  REQUIRE(blob.values.size() == f.size());
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(blob.values[i] == f[i]);

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(read_field_blob(bad), std::runtime_error);
}

TEST_CASE("csv export carries coordinates and values") {
  const auto g = GridSpec::radial(3, 8, 1.0);
  std::vector<double> f(g.cell_count(), 0.5);
  std::stringstream buf;
  write_field_csv(buf, g, f);
  std::string header;
  std::getline(buf, header);
  CHECK(header == "index,x0,x1,x2,value");
  std::string row;
  std::getline(buf, row);
  CHECK(row.find("0.5") != std::string::npos);
}

TEST_CASE("boundary tail mass is tiny for the default truncation") {
  const auto g = GridSpec::radial(3, 256, 8.0);  // 16 standard deviations
  const auto u = gaussian_density(g, 0.5);
  CHECK(boundary_tail_mass(u) < 1e-12);
}
