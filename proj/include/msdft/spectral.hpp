#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "msdft/tensor.hpp"

namespace msdft::spectral {

/// Dominant periods of a window: frequency bins f_i, periods floor(L / f_i)
/// and the channel-averaged amplitude of each bin, strongest first.
struct SpectralProfile {
    std::vector<std::size_t> frequencies;
    std::vector<std::size_t> periods;
    std::vector<double> amplitudes;

    std::size_t size() const { return frequencies.size(); }
};

bool is_power_of_two(std::size_t n);

/// Iterative radix-2 Cooley-Tukey transform; `x.size()` must be a power of two.
std::vector<std::complex<double>> fft_radix2(std::span<const double> x);
/// Direct O(n^2) summation.
std::vector<std::complex<double>> dft_direct(std::span<const double> x);
/// Full forward transform: radix-2 for power-of-two lengths, direct otherwise.
std::vector<std::complex<double>> transform(std::span<const double> x);

/**
 * Channel-averaged magnitude spectrum of a [L, C] window.
 *
 * Entry f-1 holds mean_c |sum_t x[t,c] e^{-2 pi i f t / L}| for
 * f = 1..floor(L/2); the DC bin is not reported. Throws
 * InsufficientDataError when L < 4.
 */
Tensor dft_amplitudes(const Tensor& x);

/// The k strongest bins (ties go to the lower bin) with periods floor(L / f).
SpectralProfile topk_periods(const Tensor& amplitudes, std::size_t k, std::size_t length);

/// dft_amplitudes followed by topk_periods.
SpectralProfile analyze(const Tensor& x, std::size_t k);

/// Throws ContractError when `profile` breaks a SpectralProfile invariant for
/// a window of length `length`.
void validate(const SpectralProfile& profile, std::size_t length);

}  // namespace msdft::spectral
