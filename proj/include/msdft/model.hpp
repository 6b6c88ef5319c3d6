#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "msdft/aggregation.hpp"
#include "msdft/checkpoint.hpp"
#include "msdft/deformable.hpp"
#include "msdft/spectral.hpp"
#include "msdft/tensor.hpp"

namespace msdft {

/// Every hyperparameter of the network. `hidden == 0` means 4 * embed.
struct ModelConfig {
    std::size_t lookback = 96;  // L
    std::size_t horizon = 24;   // P_horizon
    std::size_t channels = 1;   // C
    std::size_t embed = 32;     // C_m
    std::size_t scales = 2;     // k
    std::size_t taps = 3;       // K_t
    std::size_t hidden = 0;     // H
    std::uint64_t seed = 42;

    std::size_t hidden_width() const { return hidden == 0 ? 4 * embed : hidden; }
    /// Longest patch any detected period can need (even-adjusted L).
    std::size_t max_patch() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/**
 * Parameters of the full network plus the config they were built for.
 *
 * Names: embed.{weight,bias}; scale<i>.patch.{weight,bias} (a bank of
 * max_patch() taps, the first P of which serve a patch of length P);
 * scale<i>.deform.base; scale<i>.{alpha_intra,alpha_inter,offset}.{w1,b1,w2,b2};
 * head.{w1,b1,w2,b2}.
 */
class ModelState {
public:
    ModelState() = default;
    ModelState(ModelState&&) = default;
    ModelState& operator=(ModelState&&) = default;
    ModelState(const ModelState&) = delete;
    ModelState& operator=(const ModelState&) = delete;

    /// Random base weights; alpha, offset and head output layers follow the
    /// initialisation rules (alpha/offset final layers zero).
    static ModelState init(const ModelConfig& config);
    static ModelState from_parameters(const ModelConfig& config, ParameterStore params);

    ModelState clone() const;

    const ModelConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    deformable::DeformableKernel kernel(std::size_t scale, std::size_t period) const;
    aggregation::HeadParams head() const;

private:
    ModelConfig config_;
    ParameterStore params_;
};

/// Number of scalar parameters a config produces.
std::size_t parameter_count(const ModelConfig& config);

struct ScaleTrace {
    std::size_t period = 0;
    std::size_t patch = 0;
    std::size_t offset_bound = 0;
    std::vector<double> alpha;  // [N * K_t]
    std::vector<double> delta;  // [N * K_t]
};

struct SampleTrace {
    spectral::SpectralProfile profile;
    std::vector<ScaleTrace> scales;
};

/// Optional per-sample record of the routing decisions made during forward.
struct ForwardTrace {
    std::vector<SampleTrace> samples;
};

/// x: [B, L, C] -> forecast [B, P_horizon, C].
Tensor forward(const ModelState& state, const Tensor& x, ForwardTrace* trace = nullptr);

/// Mean of squared errors over all elements.
Tensor loss_mse(const Tensor& pred, const Tensor& target);

void save_model(const std::filesystem::path& path, const ModelState& state,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
    ModelState state;
    nlohmann::json extra;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace msdft
