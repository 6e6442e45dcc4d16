#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ksflow::fft {

// In-place radix-2 complex transform; n must be a power of two.
// inverse=true applies the 1/n normalisation.
void transform(std::complex<double>* a, std::size_t n, bool inverse);

// Row-major n-dimensional transform, one axis pass at a time.
void transform_nd(std::vector<std::complex<double>>& a, std::span<const std::size_t> dims,
                  bool inverse);

// Unnormalised DCT-II along each axis of a row-major array:
//   X_k = 2 sum_j x_j cos(pi k (j + 1/2) / n).
void dct2_nd(std::vector<double>& a, std::span<const std::size_t> dims);

// Inverse of dct2_nd (DCT-III with matching normalisation).
void dct3_nd(std::vector<double>& a, std::span<const std::size_t> dims);

}  // namespace ksflow::fft
