#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>

#include "ksflow/par.hpp"

using namespace ksflow;

namespace {
std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}
}  // namespace

TEST_CASE("serial and parallel reductions are bit-identical") {
  for (std::size_t n : {std::size_t{1}, std::size_t{7}, std::size_t{4096}, std::size_t{4097},
                        std::size_t{100000}}) {
    auto x = random_vector(n, 42 + n);
    auto y = random_vector(n, 43 + n);
    CHECK(par::sum(x, par::Exec::serial) == par::sum(x, par::Exec::parallel));
    CHECK(par::dot(x, y, par::Exec::serial) == par::dot(x, y, par::Exec::parallel));
    CHECK(par::max_abs(x, par::Exec::serial) == par::max_abs(x, par::Exec::parallel));
  }
}

TEST_CASE("blocked sum agrees with sequential accumulation") {
  auto x = random_vector(50000, 7);
  const double ref = std::accumulate(x.begin(), x.end(), 0.0);
  CHECK(par::sum(x) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("for_each covers every index exactly once") {
  const std::size_t n = 10001;
  std::vector<int> hits(n, 0);
  par::for_each(n, [&](std::size_t i) { hits[i] += 1; });
  for (auto h : hits) CHECK(h == 1);
}

TEST_CASE("dot rejects mismatched sizes") {
  std::vector<double> a(4, 1.0), b(5, 1.0);
  CHECK_THROWS_AS(par::dot(a, b), std::invalid_argument);
}
