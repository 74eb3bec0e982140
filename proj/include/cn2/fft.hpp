#pragma once

#include <complex>
#include <vector>

namespace cn2 {

/// In-place radix-2 FFT. Size must be a power of two (the synthesis
/// pipeline enforces this). `inverse` applies the conjugate transform
/// and the 1/N normalization.
void fft_pow2(std::vector<std::complex<double>>& data, bool inverse);

bool is_power_of_two(std::size_t n);

} // namespace cn2
