#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msdft/model.hpp"
#include "msdft/tensor.hpp"

namespace msdft::gradcheck {

struct Tolerance {
    double step = 1e-4;       // central-difference h
    double relative = 1e-3;   // |a - n| / max(|a|, |n|)
    double tiny = 1e-8;       // below this magnitude compare absolutely
    double absolute = 1e-6;
};

struct Mismatch {
    std::string name;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct Report {
    std::size_t checked = 0;
    double max_relative_error = 0.0;  // over elements compared relatively
    double max_absolute_error = 0.0;  // over elements compared absolutely
    std::vector<Mismatch> failures;

    bool passed() const { return failures.empty(); }
};

bool within(double analytic, double numeric, const Tolerance& tol);

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/**
 * Compares tape gradients of `fn(inputs)` (a scalar) with central finite
 * differences for every element of every input that requires a gradient.
 * Inputs are perturbed in place and restored.
 */
Report check(const ScalarFn& fn, const std::vector<Tensor>& inputs, const Tolerance& tol = {},
             const std::vector<std::string>& names = {});

/// Full-model check: MSE loss of forward(state, x) against `target`, over
/// every parameter of `state`.
Report check_model(const ModelState& state, const Tensor& x, const Tensor& target, const Tolerance& tol = {});

/// Overwrites every parameter with U(-scale, scale) noise so zero-initialised
/// heads contribute non-trivial gradients.
void randomize_parameters(ModelState& state, std::uint64_t seed, double scale);

struct Preset {
    ModelConfig model;
    std::size_t batch = 2;
};

/// Named configurations for the CLI: "small" (B=2, L=16, C=2, C_m=4, k=2,
/// K_t=3, horizon 4) and "tiny".
Preset preset(const std::string& name);

/// Builds a model, random inputs and targets for `preset`, and checks it.
Report run_preset(const Preset& preset, std::uint64_t seed, const Tolerance& tol = {});

}  // namespace msdft::gradcheck
