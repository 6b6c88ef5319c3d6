#pragma once

#include <cstddef>

#include "msdft/patching.hpp"
#include "msdft/tensor.hpp"

namespace msdft::deformable {

using patching::PatchTensor3D;

/// affine -> ReLU -> affine, applied row-wise: [N, in] -> [N, out].
struct TwoLayerNet {
    Tensor w1;  // [in, hidden]
    Tensor b1;  // [hidden]
    Tensor w2;  // [hidden, out]
    Tensor b2;  // [out]

    Tensor operator()(const Tensor& v) const;
};

/**
 * Per-scale dynamic deformable kernel.
 *
 * `base` is W_b with shape [K_t, C_m, C_m]: tap k maps input channels to
 * output channels. The two alpha nets produce the amplitude modulation per
 * patch and tap; `offset` is the sampling-offset head, fed with the
 * concatenated [v_intra, v_inter] context.
 */
struct DeformableKernel {
    Tensor base;
    TwoLayerNet alpha_intra;
    TwoLayerNet alpha_inter;
    TwoLayerNet offset;
    std::size_t offset_bound = 0;

    std::size_t taps() const { return base.dim(0); }
};

/// Offset bound r_t = floor(period / 4) for a detected period.
std::size_t offset_bound(std::size_t period);

struct ContextVectors {
    Tensor intra;  // [N, C_m] mean over the 2 x P/2 positions of each patch
    Tensor inter;  // [N, C_m] mean of the other patches' means; zero when N == 1
};

ContextVectors pool_context(const PatchTensor3D& pt);

/// alpha[n, k] = 1 + F_intra(v_intra[n])[k] + F_inter(v_inter[n])[k]
Tensor gen_alpha(const ContextVectors& ctx, const TwoLayerNet& intra, const TwoLayerNet& inter);

/// delta[n, k] = r_t * tanh(Psi([v_intra[n], v_inter[n]])[k]); |delta| <= r_t.
Tensor gen_offsets(const ContextVectors& ctx, const TwoLayerNet& psi, std::size_t bound);

/**
 * out[n, s, t] = sum_k alpha[n, k] * (W_b[k]^T x[n, s, t + k - K_t/2 + delta[n, k]])
 *
 * Input values at fractional positions come from linear interpolation along
 * the sub-patch time axis, clamped to [0, P/2 - 1]. Offsets are shared by the
 * two sub-patches and all channels of a patch. Output has the input's shape.
 */
PatchTensor3D deform_conv3d(const PatchTensor3D& pt, const Tensor& base, const Tensor& alpha, const Tensor& delta);

/// Full pipeline for one scale: context, alpha, offsets, deformable conv.
struct DeformOutput {
    PatchTensor3D features;
    Tensor alpha;
    Tensor delta;
};

DeformOutput apply(const PatchTensor3D& pt, const DeformableKernel& kernel);

}  // namespace msdft::deformable
