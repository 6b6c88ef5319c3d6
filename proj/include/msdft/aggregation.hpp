#pragma once

#include <cstddef>
#include <vector>

#include "msdft/spectral.hpp"
#include "msdft/tensor.hpp"

namespace msdft::aggregation {

/// Softmax-normalised scale weights. Both tensors are constants of the window.
struct ScaleWeightSet {
    Tensor raw_amplitudes;  // [k]
    Tensor weights;         // [k]
};

ScaleWeightSet scale_weights(const spectral::SpectralProfile& profile);

/// sum_i softmax(A)_i * reps[i]; every rep is [L, C_m].
Tensor aggregate(const std::vector<Tensor>& reps, const spectral::SpectralProfile& profile);

struct HeadParams {
    Tensor w1;  // [L * C_m, H]
    Tensor b1;  // [H]
    Tensor w2;  // [H, P_horizon * C]
    Tensor b2;  // [P_horizon * C]
};

/**
 * Residual sum x_agg + x_in_emb, flattened per sample, then a two-layer ReLU
 * MLP to the horizon. Accepts [L, C_m] (returns [P_horizon, C]) or a batch
 * [B, L, C_m] (returns [B, P_horizon, C]).
 */
Tensor forecast_head(const Tensor& x_agg, const Tensor& x_in_emb, const HeadParams& params, std::size_t horizon,
                     std::size_t channels);

}  // namespace msdft::aggregation
