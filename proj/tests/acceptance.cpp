// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "msdft/aggregation.hpp"
#include "msdft/data.hpp"
#include "msdft/deformable.hpp"
#include "msdft/gradcheck.hpp"
#include "msdft/model.hpp"
#include "msdft/patching.hpp"
#include "msdft/spectral.hpp"
#include "msdft/training.hpp"

using namespace msdft;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(numel_of(shape));
    for (auto& e : v) e = dist(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    const auto report = gradcheck::run_preset(gradcheck::preset("small"), 42);
    const double secs = seconds_since(t0);
    return {report.passed() && secs < 60.0,
            std::to_string(report.checked) + " elements, " + std::to_string(report.failures.size()) +
                " mismatches, max rel err " + fmt(report.max_relative_error) + ", " + fmt(secs) + " s"};
}

Outcome spectral_oracle() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> length(8, 128), chans(1, 3);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t L = length(rng), C = chans(rng);
        const auto x = random_tensor({L, C}, rng);
        const Tensor amps = spectral::dft_amplitudes(x);
        const auto got = amps.data();
        for (std::size_t f = 1; f <= L / 2; ++f) {
            double amp = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                double re = 0.0, im = 0.0;
                for (std::size_t t = 0; t < L; ++t) {
                    const double a = 2.0 * std::numbers::pi * static_cast<double>(f * t) / static_cast<double>(L);
                    re += x.at({t, c}) * std::cos(a);
                    im -= x.at({t, c}) * std::sin(a);
                }
                amp += std::hypot(re, im);
            }
            worst = std::max(worst, std::abs(got[f - 1] - amp / static_cast<double>(C)));
        }
    }
    std::vector<double> sine(96);
    for (std::size_t t = 0; t < 96; ++t) sine[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0);
    const auto profile = spectral::topk_periods(spectral::dft_amplitudes(Tensor::from({96, 1}, sine)), 1, 96);
    const bool period_ok = profile.periods.size() == 1 && profile.periods[0] == 24;
    return {worst <= 1e-9 && period_ok, "max abs diff " + fmt(worst) + " over 100 signals, sinusoid period " +
                                            std::to_string(profile.periods.at(0))};
}

Outcome deformable_reduction() {
    std::mt19937_64 rng(3);
    ModelConfig cfg;
    cfg.lookback = 48;
    cfg.embed = 5;
    cfg.taps = 3;
    const auto state = ModelState::init(cfg);  // alpha and offset heads start at zero
    bool exact = true;
    for (std::size_t period : {4u, 8u, 12u, 24u}) {
        const auto kernel = state.kernel(0, period);
        const std::size_t half = period / 2, cm = cfg.embed, taps = cfg.taps;
        const patching::PatchTensor3D pt{random_tensor({3, 2, half, cm}, rng), period, 0};
        const auto out = deformable::apply(pt, kernel);
        for (double a : out.alpha.data()) exact = exact && a == 1.0;
        for (double d : out.delta.data()) exact = exact && d == 0.0;
        // static convolution along the sub-patch axis with W_b and clamped edges
        for (std::size_t n = 0; n < 3; ++n)
            for (std::size_t s = 0; s < 2; ++s)
                for (std::size_t t = 0; t < half; ++t)
                    for (std::size_t o = 0; o < cm; ++o) {
                        double total = 0.0;
                        for (std::size_t k = 0; k < taps; ++k) {
                            const long raw = static_cast<long>(t + k) - static_cast<long>(taps / 2);
                            const auto src = static_cast<std::size_t>(std::clamp<long>(raw, 0, long(half) - 1));
                            double partial = 0.0;
                            for (std::size_t c = 0; c < cm; ++c)
                                partial += pt.data.at({n, s, src, c}) * kernel.base.at({k, c, o});
                            total = k == 0 ? partial : total + partial;
                        }
                        exact = exact && out.features.data.at({n, s, t, o}) == total;
                    }
    }
    // Delta = +1 with a centred identity tap: a one-step shift, clamped at the end.
    const std::size_t half = 6, cm = 2;
    const patching::PatchTensor3D pt{random_tensor({2, 2, half, cm}, rng), 2 * half, 0};
    auto identity = Tensor::zeros({3, cm, cm});
    for (std::size_t c = 0; c < cm; ++c) identity.mutable_data()[cm * cm + c * cm + c] = 1.0;
    const auto shifted = deformable::deform_conv3d(pt, identity, Tensor::full({2, 3}, 1.0), Tensor::full({2, 3}, 1.0));
    bool shift_ok = true;
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t t = 0; t < half; ++t)
                for (std::size_t c = 0; c < cm; ++c)
                    shift_ok = shift_ok && shifted.data.at({n, s, t, c}) ==
                                               pt.data.at({n, s, std::min(t + 1, half - 1), c});
    return {exact && shift_ok, std::string("static-conv reduction ") + (exact ? "bit-exact" : "differs") +
                                   ", unit shift " + (shift_ok ? "exact" : "differs")};
}

Outcome offset_bound() {
    std::mt19937_64 rng(4);
    ModelConfig cfg;
    cfg.lookback = 48;
    cfg.horizon = 8;
    cfg.channels = 2;
    cfg.embed = 4;
    cfg.scales = 3;
    cfg.taps = 3;
    auto state = ModelState::init(cfg);
    std::size_t checked = 0, violations = 0;
    double max_ratio = 0.0;
    for (int pass = 0; pass < 1000; ++pass) {
        // large weights push tanh into saturation
        gradcheck::randomize_parameters(state, static_cast<std::uint64_t>(pass), 4.0);
        ForwardTrace trace;
        forward(state, random_tensor({1, cfg.lookback, cfg.channels}, rng, -3.0, 3.0), &trace);
        for (const auto& sample : trace.samples)
            for (const auto& scale : sample.scales) {
                const auto bound = static_cast<double>(scale.period / 4);
                for (double d : scale.delta) {
                    ++checked;
                    if (std::abs(d) > bound) ++violations;
                    if (bound > 0) max_ratio = std::max(max_ratio, std::abs(d) / bound);
                }
            }
    }
    return {violations == 0 && checked > 0, std::to_string(checked) + " offsets over 1000 passes, " +
                                                std::to_string(violations) + " violations, max |delta|/bound " +
                                                fmt(max_ratio)};
}

Outcome reshape_round_trip() {
    std::mt19937_64 rng(5);
    std::size_t cases = 0, failures = 0;
    for (std::size_t L = 2; L <= 64; ++L) {
        const auto x = random_tensor({L, 3}, rng);
        const std::vector<double> want(x.data().begin(), x.data().end());
        for (std::size_t p = 2; p <= L; ++p) {
            // odd detected periods use the next even patch length
            const std::size_t P = patching::patch_length(p);
            const auto pt = patching::reshape_3d(patching::segment(x, P), patching::pad_length(L, P));
            const auto back = patching::unpatchify(pt, L);
            ++cases;
            if (!std::equal(want.begin(), want.end(), back.data().begin(), back.data().end())) ++failures;
        }
    }
    return {failures == 0, std::to_string(cases) + " (L,P) pairs, " + std::to_string(failures) + " mismatches"};
}

struct Experiment {
    ModelConfig model;
    data::WindowSpec spec;
    data::Dataset ds;
    training::TrainConfig train;
};

Experiment synthetic_experiment(double noise, std::size_t epochs) {
    Experiment e;
    data::SyntheticSpec syn;
    syn.rows = 400;
    syn.channels = 2;
    syn.periods = {24, 12};
    syn.noise_std = noise;
    syn.seed = 42;
    e.model.lookback = 96;
    e.model.horizon = 24;
    e.model.channels = 2;
    e.model.scales = 2;
    e.model.embed = 32;
    e.model.seed = 42;
    e.spec.lookback = 96;
    e.spec.horizon = 24;
    e.ds = data::split_normalize(data::generate_synthetic(syn), {}, e.spec);
    e.train.epochs = epochs;
    e.train.batch_size = 16;
    e.train.seed = 42;
    return e;
}

Outcome overfit() {
    const auto t0 = Clock::now();
    auto e = synthetic_experiment(0.0, 200);
    const auto result = training::train(e.model, e.ds, e.spec, e.train);
    const auto train_w = data::window_dataset(e.ds, data::Split::kTrain, e.spec);
    const auto test_w = data::window_dataset(e.ds, data::Split::kTest, e.spec);
    const double train_mse = training::evaluate(result.final_state, train_w).mse;
    const double test_mse = training::evaluate(result.final_state, test_w).mse;
    const double secs = seconds_since(t0);
    return {!result.diverged && train_mse < 1e-2 && test_mse < 5e-2,
            "train MSE " + fmt(train_mse) + ", test MSE " + fmt(test_mse) + ", " + fmt(secs) + " s"};
}

Outcome beats_persistence() {
    auto e = synthetic_experiment(0.1, 40);
    const auto result = training::train(e.model, e.ds, e.spec, e.train);
    const auto test_w = data::window_dataset(e.ds, data::Split::kTest, e.spec);
    const double model_mse = training::evaluate(result.best_state, test_w).mse;
    // persistence: repeat the last observed row over the horizon
    double sq = 0.0;
    std::size_t count = 0;
    for (const auto& w : test_w)
        for (std::size_t h = 0; h < w.y.dim(0); ++h)
            for (std::size_t c = 0; c < w.y.dim(1); ++c) {
                const double err = w.y.at({h, c}) - w.x.at({w.x.dim(0) - 1, c});
                sq += err * err;
                ++count;
            }
    const double persistence_mse = sq / static_cast<double>(count);
    return {model_mse < persistence_mse,
            "model test MSE " + fmt(model_mse) + " vs persistence " + fmt(persistence_mse)};
}

Outcome aggregation_properties() {
    std::mt19937_64 rng(8);
    auto profile_of = [](std::vector<double> amps) {
        spectral::SpectralProfile p;
        for (std::size_t i = 0; i < amps.size(); ++i) {
            p.frequencies.push_back(i + 1);
            p.periods.push_back(32 / (i + 1));
        }
        p.amplitudes = std::move(amps);
        return p;
    };
    double worst_sum = 0.0, worst_mean = 0.0;
    bool identity = true;
    for (int trial = 0; trial < 100; ++trial) {
        const auto amps = random_tensor({5}, rng, 0.0, 80.0);
        const auto w = aggregation::scale_weights(profile_of({amps.data().begin(), amps.data().end()})).weights;
        double s = 0.0;
        for (double v : w.data()) s += v;
        worst_sum = std::max(worst_sum, std::abs(s - 1.0));

        const auto a = random_tensor({32, 4}, rng), b = random_tensor({32, 4}, rng);
        const auto single = aggregation::aggregate({a}, profile_of({amps.data()[0]}));
        identity = identity && std::equal(a.data().begin(), a.data().end(), single.data().begin());
        const auto pair = aggregation::aggregate({a, b}, profile_of({amps.data()[1], amps.data()[1]}));
        for (std::size_t i = 0; i < a.numel(); ++i)
            worst_mean = std::max(worst_mean, std::abs(pair.data()[i] - (a.data()[i] + b.data()[i]) / 2.0));
    }
    return {worst_sum <= 1e-9 && identity && worst_mean <= 1e-12,
            "weight-sum err " + fmt(worst_sum) + ", k=1 identity " + (identity ? "exact" : "broken") +
                ", equal-amplitude mean err " + fmt(worst_mean)};
}

Outcome metric_definitions() {
    std::mt19937_64 rng(9);
    ModelConfig cfg;
    cfg.lookback = 32;
    cfg.horizon = 5;
    cfg.channels = 3;
    cfg.embed = 4;
    const auto state = ModelState::init(cfg);
    std::vector<data::Window> windows;
    for (std::size_t i = 0; i < 37; ++i)
        windows.push_back({random_tensor({32, 3}, rng), random_tensor({5, 3}, rng, -2, 2), i});
    const auto report = training::evaluate(state, windows, 8);

    double sq = 0.0, ab = 0.0;
    std::size_t count = 0;
    std::vector<data::Window> perfect;
    for (const auto& w : windows) {
        const auto pred = forward(state, Tensor::from({1, 32, 3}, {w.x.data().begin(), w.x.data().end()}));
        for (std::size_t i = 0; i < pred.numel(); ++i) sq += std::pow(pred.data()[i] - w.y.data()[i], 2);
        for (std::size_t i = 0; i < pred.numel(); ++i) ab += std::abs(pred.data()[i] - w.y.data()[i]);
        count += pred.numel();
        perfect.push_back({w.x, Tensor::from({5, 3}, {pred.data().begin(), pred.data().end()}), w.start});
    }
    const double mse_err = std::abs(report.mse - sq / static_cast<double>(count));
    const double mae_err = std::abs(report.mae - ab / static_cast<double>(count));
    const auto zero = training::evaluate(state, perfect, 8);
    const bool exact_zero = zero.mse == 0.0 && zero.mae == 0.0;
    return {mse_err <= 1e-12 && mae_err <= 1e-12 && exact_zero,
            "mse err " + fmt(mse_err) + ", mae err " + fmt(mae_err) + ", perfect predictions (" + fmt(zero.mse) +
                "," + fmt(zero.mae) + ")"};
}

Outcome determinism_and_persistence() {
    data::SyntheticSpec syn;
    syn.rows = 240;
    syn.noise_std = 0.1;
    Experiment e;
    e.model.lookback = 48;
    e.model.horizon = 12;
    e.model.channels = 2;
    e.model.embed = 8;
    e.spec.lookback = 48;
    e.spec.horizon = 12;
    e.ds = data::split_normalize(data::generate_synthetic(syn), {}, e.spec);
    e.train.epochs = 4;
    e.train.batch_size = 16;
    e.train.lr = 1e-3;
    const auto a = training::train(e.model, e.ds, e.spec, e.train);
    const auto b = training::train(e.model, e.ds, e.spec, e.train);
    const bool logs_equal = training::format_log_csv(a.log) == training::format_log_csv(b.log);

    const auto path = std::filesystem::temp_directory_path() / "msdft_acceptance.msdft";
    save_model(path, a.best_state);
    const auto loaded = load_model(path);
    std::filesystem::remove(path);
    const auto test_w = data::window_dataset(e.ds, data::Split::kTest, e.spec);
    const auto before = training::evaluate(a.best_state, test_w);
    const auto after = training::evaluate(loaded.state, test_w);
    const bool metrics_equal = before.mse == after.mse && before.mae == after.mae && before.step_mse == after.step_mse;
    return {logs_equal && metrics_equal, std::string("epoch logs ") + (logs_equal ? "identical" : "differ") +
                                             ", reloaded metrics " + (metrics_equal ? "bit-exact" : "differ")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"spectral oracle", spectral_oracle},
        {"deformable reduction", deformable_reduction},
        {"offset bound", offset_bound},
        {"reshape round-trip", reshape_round_trip},
        {"overfit synthetic", overfit},
        {"beats persistence", beats_persistence},
        {"aggregation properties", aggregation_properties},
        {"metric definitions", metric_definitions},
        {"determinism and checkpoint", determinism_and_persistence},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        if (!outcome.pass) ++failed;
        std::cout << (outcome.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << i + 1 << ". " << criteria[i].first
                  << ": " << outcome.detail << std::endl;
    }
    std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
