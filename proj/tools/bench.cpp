// Serial vs OpenMP timing for the data-parallel kernels: reductions, the
// padded-FFT convolution, the log-domain Sinkhorn sweep and the FD stencil.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "ksflow/bessel.hpp"
#include "ksflow/elliptic.hpp"
#include "ksflow/fd.hpp"
#include "ksflow/par.hpp"
#include "ksflow/transport.hpp"

using namespace ksflow;
using clk = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto t0 = clk::now();
  for (int r = 0; r < repeats; ++r) fn();
  const auto dt = std::chrono::duration<double, std::milli>(clk::now() - t0).count();
  return dt / repeats;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", par::thread_count());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  {  // reductions
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> dist(0, 1);
    std::vector<double> x(1 << 22);
    for (auto& v : x) v = dist(rng);
    const double s = time_ms([&] { par::sum(x, par::Exec::serial); }, 10);
    const double p = time_ms([&] { par::sum(x, par::Exec::parallel); }, 10);
    report("blocked sum (4M)", s, p);
    if (par::sum(x, par::Exec::serial) != par::sum(x, par::Exec::parallel))
      std::puts("WARNING: serial/parallel sums differ");
  }

  const auto g = GridSpec::full_box(3, 32, 8.0);
  const auto u = gaussian_density(g, 0.8);
  {  // padded convolution
    auto& mode = par::default_exec();
    mode = par::Exec::serial;
    const double s = time_ms([&] { apply_bessel(g, u.values, 1.0); }, 3);
    mode = par::Exec::parallel;
    const double p = time_ms([&] { apply_bessel(g, u.values, 1.0); }, 3);
    report("bessel convolution 32^3", s, p);
  }
  {  // elliptic DCT solve
    auto& mode = par::default_exec();
    mode = par::Exec::serial;
    const double s = time_ms([&] { elliptic_solve(g, u.values, 1.0, 1.0); }, 3);
    mode = par::Exec::parallel;
    const double p = time_ms([&] { elliptic_solve(g, u.values, 1.0, 1.0); }, 3);
    report("elliptic dct solve 32^3", s, p);
  }
  {  // sinkhorn divergence on the radius line
    const auto gr = GridSpec::radial(3, 256, 8.0);
    const auto a = gaussian_density(gr, 0.5);
    const auto b = shell_density(gr, 2.0, 0.5);
    auto& mode = par::default_exec();
    mode = par::Exec::serial;
    const double s = time_ms([&] { w2_sinkhorn(a, b); }, 1);
    mode = par::Exec::parallel;
    const double p = time_ms([&] { w2_sinkhorn(a, b); }, 1);
    report("sinkhorn radial n=256", s, p);
  }
  {  // FD stencil march
    const auto gr = GridSpec::radial(3, 512, 8.0);
    const auto u0 = gaussian_density(gr, 0.5);
    ModelParams mp;
    mp.dim = 3;
    mp.chi = 0.5;
    mp.alpha = 1.0;
    mp.tau = 1.0;
    mp.step = 1e-3;
    mp.c_hls = 3.0;
    const auto v0 = apply_bessel(gr, u0.values, 1.0);
    FdConfig cfg;
    cfg.dt = 1e-3;
    auto march = [&] {
      FdState st{u0, v0, 0.0};
      for (int n = 0; n < 100; ++n) fd_step(st, cfg, mp);
    };
    auto& mode = par::default_exec();
    mode = par::Exec::serial;
    const double s = time_ms(march, 1);
    mode = par::Exec::parallel;
    const double p = time_ms(march, 1);
    report("fd march 100x n=512", s, p);
  }
  par::default_exec() = par::Exec::parallel;
  return 0;
}
