#include "ksflow/fft.hpp"

#include <cmath>
#include <stdexcept>

#include "ksflow/par.hpp"

namespace ksflow::fft {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// base offsets of every 1-D line along `axis` of a row-major array
template <typename F>
void for_each_line(std::span<const std::size_t> dims, std::size_t axis, F&& fn) {
  std::size_t stride = 1;
  for (std::size_t a = axis + 1; a < dims.size(); ++a) stride *= dims[a];
  std::size_t outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= dims[a];
  const std::size_t inner = stride;
  const std::size_t n_ax = dims[axis];
  par::for_each(outer * inner, [&](std::size_t l) {
    const std::size_t o = l / inner;
    const std::size_t i = l % inner;
    fn(o * n_ax * inner + i, stride);
  });
}

}  // namespace

void transform(std::complex<double>* a, std::size_t n, bool inverse) {
  if (!is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) a[i] *= inv;
  }
}

void transform_nd(std::vector<std::complex<double>>& a, std::span<const std::size_t> dims,
                  bool inverse) {
  std::size_t total = 1;
  for (auto d : dims) total *= d;
  if (a.size() != total) throw std::invalid_argument("fft: array size does not match dims");
  for (std::size_t ax = 0; ax < dims.size(); ++ax) {
    const std::size_t n = dims[ax];
    if (n == 1) continue;
    for_each_line(dims, ax, [&](std::size_t base, std::size_t stride) {
      std::vector<std::complex<double>> line(n);
      for (std::size_t k = 0; k < n; ++k) line[k] = a[base + k * stride];
      transform(line.data(), n, inverse);
      for (std::size_t k = 0; k < n; ++k) a[base + k * stride] = line[k];
    });
  }
}

namespace {

// Makhoul's even permutation: one length-n complex FFT per DCT line.
void dct2_line(double* x, std::size_t n, std::size_t stride,
               std::vector<std::complex<double>>& scratch) {
  scratch.resize(n);
  for (std::size_t i = 0; 2 * i < n; ++i) {
    scratch[i] = x[(2 * i) * stride];
    scratch[n - 1 - i] = x[(2 * i + 1) * stride];
  }
  transform(scratch.data(), n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const double ang = -M_PI * static_cast<double>(k) / (2.0 * static_cast<double>(n));
    const std::complex<double> w(std::cos(ang), std::sin(ang));
    x[k * stride] = 2.0 * (w * scratch[k]).real();
  }
}

void dct3_line(double* x, std::size_t n, std::size_t stride,
               std::vector<std::complex<double>>& scratch) {
  scratch.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double xk = x[k * stride];
    const double xnk = k == 0 ? 0.0 : x[(n - k) * stride];
    const double ang = M_PI * static_cast<double>(k) / (2.0 * static_cast<double>(n));
    const std::complex<double> w(std::cos(ang), std::sin(ang));
    scratch[k] = 0.5 * w * std::complex<double>(xk, -xnk);
  }
  transform(scratch.data(), n, true);
  for (std::size_t i = 0; 2 * i < n; ++i) {
    x[(2 * i) * stride] = scratch[i].real();
    x[(2 * i + 1) * stride] = scratch[n - 1 - i].real();
  }
}

}  // namespace

void dct2_nd(std::vector<double>& a, std::span<const std::size_t> dims) {
  std::size_t total = 1;
  for (auto d : dims) total *= d;
  if (a.size() != total) throw std::invalid_argument("dct2: array size does not match dims");
  for (std::size_t ax = 0; ax < dims.size(); ++ax) {
    if (dims[ax] == 1) continue;
    for_each_line(dims, ax, [&](std::size_t base, std::size_t stride) {
      std::vector<std::complex<double>> scratch;
      dct2_line(a.data() + base, dims[ax], stride, scratch);
    });
  }
}

void dct3_nd(std::vector<double>& a, std::span<const std::size_t> dims) {
  std::size_t total = 1;
  for (auto d : dims) total *= d;
  if (a.size() != total) throw std::invalid_argument("dct3: array size does not match dims");
  for (std::size_t ax = 0; ax < dims.size(); ++ax) {
    if (dims[ax] == 1) continue;
    for_each_line(dims, ax, [&](std::size_t base, std::size_t stride) {
      std::vector<std::complex<double>> scratch;
      dct3_line(a.data() + base, dims[ax], stride, scratch);
    });
  }
}

}  // namespace ksflow::fft
