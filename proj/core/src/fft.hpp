// fft.hpp
// Thin thread-safe wrappers over FFTW's one-dimensional real transforms.
// Plans are cached per length; execution uses the new-array interface so
// concurrent calls on distinct buffers are safe.

#pragma once

#include <complex>

namespace cbf::detail {

// out gets n/2 + 1 coefficients of the one-sided spectrum.
void fft_real_forward(const double* in, std::complex<double>* out, int n);

// Inverse of fft_real_forward including the 1/n normalization.
void fft_real_inverse(const std::complex<double>* in, double* out, int n);

}  // namespace cbf::detail
