#pragma once

#include <complex>
#include <vector>

namespace qtel::util {

/// Forward DFT, X[k] = sum_n x[n] exp(-2*pi*i*k*n/N). Any length.
std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& x);

/// Inverse DFT including the 1/N factor.
std::vector<std::complex<double>> ifft(const std::vector<std::complex<double>>& x);

/// Real-input forward DFT, returns the N/2+1 non-negative-frequency bins.
std::vector<std::complex<double>> rfft(const std::vector<double>& x);

/// Circular cross-correlation c[k] = sum_i a[(i+k) mod N] * b[i].
std::vector<double> circular_cross_correlation(const std::vector<double>& a,
                                               const std::vector<double>& b);

} // namespace qtel::util
