#include "msdft/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "msdft/errors.hpp"

namespace msdft::spectral {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<std::complex<double>> fft_radix2(std::span<const double> x) {
    const std::size_t n = x.size();
    if (!is_power_of_two(n)) throw ContractError("fft_radix2 length must be a power of two");
    std::vector<std::complex<double>> a(x.begin(), x.end());

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        // twiddles evaluated directly rather than by recurrence
        std::vector<std::complex<double>> w(half);
        for (std::size_t k = 0; k < half; ++k) {
            w[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len));
        }
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const auto u = a[start + k];
                const auto v = a[start + k + half] * w[k];
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
    }
    return a;
}

std::vector<std::complex<double>> dft_direct(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t f = 0; f < n; ++f) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            // reduce f*t mod n first so the angle stays in [0, 2 pi)
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((f * t) % n) / static_cast<double>(n);
            acc += x[t] * std::polar(1.0, angle);
        }
        out[f] = acc;
    }
    return out;
}

std::vector<std::complex<double>> transform(std::span<const double> x) {
    return is_power_of_two(x.size()) ? fft_radix2(x) : dft_direct(x);
}

Tensor dft_amplitudes(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("dft_amplitudes expects [L, C], got " + shape_str(x.shape()));
    const std::size_t length = x.dim(0);
    const std::size_t channels = x.dim(1);
    if (length < 4) {
        throw InsufficientDataError("spectral analysis needs at least 4 timesteps, got " + std::to_string(length));
    }
    const std::size_t bins = length / 2;
    std::vector<double> amps(bins, 0.0);
    std::vector<double> column(length);
    auto values = x.data();
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < length; ++t) column[t] = values[t * channels + c];
        const auto spectrum = transform(column);
        for (std::size_t f = 1; f <= bins; ++f) amps[f - 1] += std::abs(spectrum[f]);
    }
    for (double& a : amps) a /= static_cast<double>(channels);
    return Tensor::from({bins}, std::move(amps));
}

SpectralProfile topk_periods(const Tensor& amplitudes, std::size_t k, std::size_t length) {
    const std::size_t bins = amplitudes.numel();
    if (bins != length / 2) {
        throw DimensionError("amplitude vector of " + std::to_string(bins) + " bins does not match L=" +
                             std::to_string(length));
    }
    if (k < 1 || k > bins) {
        throw ConfigError("k must be in [1, " + std::to_string(bins) + "], got " + std::to_string(k));
    }
    auto amps = amplitudes.data();
    std::vector<std::size_t> order(bins);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return amps[a] > amps[b]; });

    SpectralProfile profile;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t f = order[i] + 1;
        profile.frequencies.push_back(f);
        profile.periods.push_back(length / f);
        profile.amplitudes.push_back(amps[order[i]]);
    }
    return profile;
}

SpectralProfile analyze(const Tensor& x, std::size_t k) {
    return topk_periods(dft_amplitudes(x), k, x.dim(0));
}

void validate(const SpectralProfile& profile, std::size_t length) {
    const std::size_t k = profile.frequencies.size();
    if (k == 0 || profile.periods.size() != k || profile.amplitudes.size() != k) {
        throw ContractError("spectral profile lists must share a length >= 1");
    }
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t f = profile.frequencies[i];
        if (f < 1 || f > length / 2) throw ContractError("frequency bin out of range: " + std::to_string(f));
        if (profile.periods[i] != length / f) throw ContractError("period does not equal floor(L / f)");
        if (profile.amplitudes[i] < 0.0) throw ContractError("negative amplitude");
        if (i > 0 && profile.amplitudes[i] > profile.amplitudes[i - 1]) {
            throw ContractError("amplitudes not sorted non-increasing");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (profile.frequencies[j] == f) throw ContractError("duplicate frequency bin");
        }
    }
}

}  // namespace msdft::spectral
