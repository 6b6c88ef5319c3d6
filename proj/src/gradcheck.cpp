#include "msdft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "msdft/errors.hpp"

namespace msdft::gradcheck {

bool within(double analytic, double numeric, const Tolerance& tol) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double diff = std::abs(analytic - numeric);
    if (scale < tol.tiny) return diff <= tol.absolute;
    return diff / scale <= tol.relative;
}

Report check(const ScalarFn& fn, const std::vector<Tensor>& inputs, const Tolerance& tol,
             const std::vector<std::string>& names) {
    std::vector<Tensor> args = inputs;
    for (auto& t : args) t.zero_grad();
    {
        Tape tape;
        const Tensor loss = fn(args);
        tape.backward(loss);
    }
    Report report;
    for (std::size_t a = 0; a < args.size(); ++a) {
        Tensor& t = args[a];
        if (!t.requires_grad()) continue;
        const std::vector<double> analytic = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                          : std::vector<double>(t.numel(), 0.0);
        auto values = t.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            values[i] = original + tol.step;
            const double plus = fn(args).item();
            values[i] = original - tol.step;
            const double minus = fn(args).item();
            values[i] = original;
            const double numeric = (plus - minus) / (2.0 * tol.step);

            ++report.checked;
            const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
            const double diff = std::abs(analytic[i] - numeric);
            if (scale < tol.tiny) {
                report.max_absolute_error = std::max(report.max_absolute_error, diff);
            } else {
                report.max_relative_error = std::max(report.max_relative_error, diff / scale);
            }
            if (!within(analytic[i], numeric, tol)) {
                report.failures.push_back({a < names.size() ? names[a] : "input" + std::to_string(a), i, analytic[i],
                                           numeric});
            }
        }
    }
    return report;
}

Report check_model(const ModelState& state, const Tensor& x, const Tensor& target, const Tolerance& tol) {
    std::vector<Tensor> params;
    std::vector<std::string> names;
    for (const auto& e : state.params().entries()) {
        params.push_back(e.value);
        names.push_back(e.name);
    }
    // The parameter handles alias the state's storage, so perturbing an
    // argument perturbs the model that forward() reads.
    const ScalarFn fn = [&](const std::vector<Tensor>&) { return loss_mse(forward(state, x), target); };
    return check(fn, params, tol, names);
}

void randomize_parameters(ModelState& state, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& e : state.params().entries()) {
        for (double& v : e.value.mutable_data()) v = dist(rng);
    }
}

Preset preset(const std::string& name) {
    Preset p;
    if (name == "small") {
        p.model.lookback = 16;
        p.model.horizon = 4;
        p.model.channels = 2;
        p.model.embed = 4;
        p.model.scales = 2;
        p.model.taps = 3;
        p.batch = 2;
    } else if (name == "tiny") {
        p.model.lookback = 8;
        p.model.horizon = 2;
        p.model.channels = 1;
        p.model.embed = 2;
        p.model.scales = 1;
        p.model.taps = 3;
        p.batch = 1;
    } else {
        throw ConfigError("unknown gradcheck preset '" + name + "' (expected small or tiny)");
    }
    return p;
}

Report run_preset(const Preset& preset, std::uint64_t seed, const Tolerance& tol) {
    ModelConfig config = preset.model;
    config.seed = seed;
    ModelState state = ModelState::init(config);
    randomize_parameters(state, seed + 1, 0.5);

    std::mt19937_64 rng(seed + 2);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> xv(preset.batch * config.lookback * config.channels);
    std::vector<double> yv(preset.batch * config.horizon * config.channels);
    for (double& v : xv) v = dist(rng);
    for (double& v : yv) v = dist(rng);
    const Tensor x = Tensor::from({preset.batch, config.lookback, config.channels}, std::move(xv));
    const Tensor y = Tensor::from({preset.batch, config.horizon, config.channels}, std::move(yv));
    return check_model(state, x, y, tol);
}

}  // namespace msdft::gradcheck
