#include "msdft/aggregation.hpp"

#include <string>

#include "msdft/errors.hpp"
#include "msdft/ops.hpp"

namespace msdft::aggregation {

ScaleWeightSet scale_weights(const spectral::SpectralProfile& profile) {
    if (profile.size() == 0) throw ContractError("scale weights need at least one scale");
    ScaleWeightSet set;
    set.raw_amplitudes = Tensor::from({profile.size()}, profile.amplitudes);
    set.weights = ops::softmax(set.raw_amplitudes, 0);
    return set;
}

Tensor aggregate(const std::vector<Tensor>& reps, const spectral::SpectralProfile& profile) {
    if (reps.size() != profile.size()) {
        throw ContractError("aggregate: " + std::to_string(reps.size()) + " representations for " +
                            std::to_string(profile.size()) + " scales");
    }
    const ScaleWeightSet set = scale_weights(profile);
    auto w = set.weights.data();
    Tensor out;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        if (reps[i].shape() != reps[0].shape()) {
            throw DimensionError("aggregate: representation shapes differ " + shape_str(reps[0].shape()) + " vs " +
                                 shape_str(reps[i].shape()));
        }
        const Tensor term = ops::scale(reps[i], w[i]);
        out = out.defined() ? ops::add(out, term) : term;
    }
    return out;
}

Tensor forecast_head(const Tensor& x_agg, const Tensor& x_in_emb, const HeadParams& params, std::size_t horizon,
                     std::size_t channels) {
    if (x_agg.shape() != x_in_emb.shape()) {
        throw DimensionError("forecast_head residual shapes differ: " + shape_str(x_agg.shape()) + " vs " +
                             shape_str(x_in_emb.shape()));
    }
    const bool batched = x_agg.rank() == 3;
    if (!batched && x_agg.rank() != 2) {
        throw DimensionError("forecast_head expects [L, C_m] or [B, L, C_m], got " + shape_str(x_agg.shape()));
    }
    const std::size_t batch = batched ? x_agg.dim(0) : 1;
    const std::size_t features = x_agg.numel() / batch;
    if (params.w1.rank() != 2 || params.w1.dim(0) != features || params.w2.rank() != 2 ||
        params.w2.dim(1) != horizon * channels) {
        throw DimensionError("forecast_head weights " + shape_str(params.w1.shape()) + ", " +
                             shape_str(params.w2.shape()) + " do not fit input " + shape_str(x_agg.shape()));
    }
    const Tensor residual = ops::reshape(ops::add(x_agg, x_in_emb), {batch, features});
    const Tensor hidden = ops::relu(ops::add(ops::matmul(residual, params.w1), params.b1));
    const Tensor out = ops::add(ops::matmul(hidden, params.w2), params.b2);
    return batched ? ops::reshape(out, {batch, horizon, channels}) : ops::reshape(out, {horizon, channels});
}

}  // namespace msdft::aggregation
