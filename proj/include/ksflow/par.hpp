#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

// Data-parallel kernel layer. Every kernel has a serial path and an OpenMP
// path that produce bit-identical results: reductions accumulate inside
// fixed-size blocks and combine the block partials in index order, so the
// floating-point summation order never depends on the thread count.
namespace ksflow::par {

enum class Exec { serial, parallel };

inline Exec& default_exec() {
#ifdef _OPENMP
  static Exec mode = Exec::parallel;
#else
  static Exec mode = Exec::serial;
#endif
  return mode;
}

inline constexpr std::size_t kBlock = 4096;

inline std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

// body(begin, end) over [0, n) in blocks.
template <typename F>
void for_blocks(std::size_t n, F&& body, Exec exec = default_exec()) {
  const std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(block_count(n));
  if (exec == Exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
      const std::size_t end = begin + kBlock < n ? begin + kBlock : n;
      body(begin, end);
    }
    return;
#endif
  }
  for (std::ptrdiff_t b = 0; b < nb; ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
    const std::size_t end = begin + kBlock < n ? begin + kBlock : n;
    body(begin, end);
  }
}

// body(i) for i in [0, n).
template <typename F>
void for_each(std::size_t n, F&& body, Exec exec = default_exec()) {
  for_blocks(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) body(i);
      },
      exec);
}

// Deterministic sum of term(i) over [0, n).
template <typename F>
double sum_terms(std::size_t n, F&& term, Exec exec = default_exec()) {
  const std::size_t nb = block_count(n);
  std::vector<double> partial(nb, 0.0);
  for_blocks(
      n,
      [&](std::size_t begin, std::size_t end) {
        double acc = 0.0;
        for (std::size_t i = begin; i < end; ++i) acc += term(i);
        partial[begin / kBlock] = acc;
      },
      exec);
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

inline double sum(std::span<const double> x, Exec exec = default_exec()) {
  return sum_terms(x.size(), [&](std::size_t i) { return x[i]; }, exec);
}

inline double dot(std::span<const double> a, std::span<const double> b,
                  Exec exec = default_exec()) {
  if (a.size() != b.size()) throw std::invalid_argument("par::dot: size mismatch");
  return sum_terms(a.size(), [&](std::size_t i) { return a[i] * b[i]; }, exec);
}

template <typename F>
double max_terms(std::size_t n, F&& term, Exec exec = default_exec()) {
  if (n == 0) return 0.0;
  const std::size_t nb = block_count(n);
  std::vector<double> partial(nb, -HUGE_VAL);
  for_blocks(
      n,
      [&](std::size_t begin, std::size_t end) {
        double acc = -HUGE_VAL;
        for (std::size_t i = begin; i < end; ++i) {
          const double t = term(i);
          if (t > acc) acc = t;
        }
        partial[begin / kBlock] = acc;
      },
      exec);
  double best = -HUGE_VAL;
  for (double p : partial) {
    if (p > best) best = p;
  }
  return best;
}

inline double max_abs(std::span<const double> x, Exec exec = default_exec()) {
  return max_terms(x.size(), [&](std::size_t i) { return std::abs(x[i]); }, exec);
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace ksflow::par
