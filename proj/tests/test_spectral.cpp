#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "msdft/errors.hpp"
#include "msdft/spectral.hpp"
#include "test_util.hpp"

using namespace msdft;
using msdft::testing::random_tensor;
using msdft::testing::values;

namespace {

constexpr double kPi = std::numbers::pi;

// O(L^2) reference, written independently of the library transform.
std::vector<double> naive_amplitudes(const Tensor& x) {
    const std::size_t L = x.dim(0), C = x.dim(1);
    std::vector<double> out(L / 2, 0.0);
    for (std::size_t f = 1; f <= L / 2; ++f) {
        for (std::size_t c = 0; c < C; ++c) {
            double re = 0, im = 0;
            for (std::size_t t = 0; t < L; ++t) {
                const double ang = 2 * kPi * static_cast<double>(f) * static_cast<double>(t) / static_cast<double>(L);
                re += x.at({t, c}) * std::cos(ang);
                im -= x.at({t, c}) * std::sin(ang);
            }
            out[f - 1] += std::hypot(re, im) / static_cast<double>(C);
        }
    }
    return out;
}

Tensor sinusoids(std::size_t L, const std::vector<double>& periods) {
    std::vector<double> v(L * periods.size());
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t c = 0; c < periods.size(); ++c)
            v[t * periods.size() + c] = std::sin(2 * kPi * static_cast<double>(t) / periods[c]);
    return Tensor::from({L, periods.size()}, v);
}

}  // namespace

TEST(Transform, Radix2MatchesDirect) {
    std::mt19937_64 rng(20);
    for (std::size_t n : {1u, 2u, 4u, 8u, 64u, 256u}) {
        const auto x = values(random_tensor({n}, rng));
        const auto fast = spectral::fft_radix2(x);
        const auto slow = spectral::dft_direct(x);
        for (std::size_t i = 0; i < n; ++i) EXPECT_LT(std::abs(fast[i] - slow[i]), 1e-10) << n << " " << i;
    }
}

TEST(Transform, Parseval) {
    std::mt19937_64 rng(21);
    for (std::size_t n : {12u, 32u, 97u}) {
        const auto x = values(random_tensor({n}, rng));
        const auto X = spectral::transform(x);
        double time = 0, freq = 0;
        for (double v : x) time += v * v;
        for (auto z : X) freq += std::norm(z);
        EXPECT_NEAR(freq / static_cast<double>(n), time, 1e-9 * time);
    }
}

TEST(DftAmplitudes, MatchesNaiveOracle) {
    std::mt19937_64 rng(22);
    for (std::size_t L : {4u, 9u, 16u, 30u, 96u, 128u}) {
        const auto x = random_tensor({L, 3}, rng);
        const auto got = values(spectral::dft_amplitudes(x));
        const auto want = naive_amplitudes(x);
        ASSERT_EQ(got.size(), L / 2);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
    }
}

TEST(DftAmplitudes, SinglePeak) {
    const auto amps = values(spectral::dft_amplitudes(sinusoids(96, {24})));
    EXPECT_NEAR(amps[3], 48.0, 1e-9);
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if (i != 3) EXPECT_LT(amps[i], 1e-9) << "bin " << i + 1;
    }
}

TEST(DftAmplitudes, ConstantSeriesHasNoPeaks) {
    for (double v : values(spectral::dft_amplitudes(Tensor::full({32, 2}, 3.5)))) EXPECT_LT(v, 1e-9);
}

TEST(DftAmplitudes, TwoChannelsAverage) {
    const auto amps = values(spectral::dft_amplitudes(sinusoids(96, {24, 12})));
    EXPECT_NEAR(amps[3], 24.0, 1e-9);
    EXPECT_NEAR(amps[7], 24.0, 1e-9);
}

TEST(DftAmplitudes, CircularShiftInvariant) {
    std::mt19937_64 rng(23);
    const auto x = random_tensor({40, 2}, rng);
    std::vector<double> shifted(80);
    for (std::size_t t = 0; t < 40; ++t)
        for (std::size_t c = 0; c < 2; ++c) shifted[((t + 7) % 40) * 2 + c] = x.at({t, c});
    const auto a = values(spectral::dft_amplitudes(x));
    const auto b = values(spectral::dft_amplitudes(Tensor::from({40, 2}, shifted)));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(DftAmplitudes, TooShort) {
    EXPECT_THROW(spectral::dft_amplitudes(Tensor::zeros({3, 1})), InsufficientDataError);
}

TEST(TopkPeriods, Examples) {
    std::vector<double> amps(48, 0.1);
    amps[3] = 5.0;
    auto p = spectral::topk_periods(Tensor::from({48}, amps), 1, 96);
    EXPECT_EQ(p.frequencies, (std::vector<std::size_t>{4}));
    EXPECT_EQ(p.periods, (std::vector<std::size_t>{24}));

    p = spectral::topk_periods(Tensor::full({48}, 1.0), 2, 96);
    EXPECT_EQ(p.frequencies, (std::vector<std::size_t>{1, 2}));

    amps[7] = 9.0;
    p = spectral::topk_periods(Tensor::from({48}, amps), 2, 96);
    EXPECT_EQ(p.frequencies, (std::vector<std::size_t>{8, 4}));
    EXPECT_EQ(p.periods, (std::vector<std::size_t>{12, 24}));
    EXPECT_GE(p.amplitudes[0], p.amplitudes[1]);
}

TEST(TopkPeriods, MatchesSortOracle) {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 20; ++trial) {
        const auto amps = random_tensor({30}, rng, 0, 1);
        const auto p = spectral::topk_periods(amps, 5, 61);
        std::vector<std::size_t> idx(30);
        for (std::size_t i = 0; i < 30; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return amps.at({a}) > amps.at({b}); });
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_EQ(p.frequencies[i], idx[i] + 1);
            EXPECT_EQ(p.periods[i], 61 / (idx[i] + 1));
        }
        spectral::validate(p, 61);
    }
}

TEST(TopkPeriods, KOutOfRange) {
    EXPECT_THROW(spectral::topk_periods(Tensor::zeros({8}), 0, 16), ConfigError);
    EXPECT_THROW(spectral::topk_periods(Tensor::zeros({8}), 9, 16), ConfigError);
}

TEST(Analyze, PeriodsDivideLookback) {
    std::mt19937_64 rng(25);
    for (std::size_t L : {8u, 17u, 96u}) {
        const auto p = spectral::analyze(random_tensor({L, 2}, rng), 3);
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_GE(p.periods[i], 2u);
            EXPECT_LE(p.periods[i], L);
            EXPECT_EQ(p.periods[i], L / p.frequencies[i]);
        }
    }
}
