#include "msdft/deformable.hpp"

#include <string>
#include <vector>

#include "msdft/errors.hpp"
#include "msdft/ops.hpp"

namespace msdft::deformable {

Tensor TwoLayerNet::operator()(const Tensor& v) const {
    const Tensor hidden = ops::relu(ops::add(ops::matmul(v, w1), b1));
    return ops::add(ops::matmul(hidden, w2), b2);
}

std::size_t offset_bound(std::size_t period) { return period / 4; }

ContextVectors pool_context(const PatchTensor3D& pt) {
    const std::size_t n = pt.patches();
    const std::size_t channels = pt.channels();
    const Tensor positions = ops::reshape(pt.data, {n, 2 * pt.half(), channels});
    ContextVectors ctx;
    ctx.intra = ops::mean(positions, 1);
    if (n == 1) {
        ctx.inter = Tensor::zeros({1, channels});
    } else {
        const Tensor total = ops::sum(ctx.intra, 0, true);
        ctx.inter = ops::scale(ops::sub(total, ctx.intra), 1.0 / static_cast<double>(n - 1));
    }
    return ctx;
}

Tensor gen_alpha(const ContextVectors& ctx, const TwoLayerNet& intra, const TwoLayerNet& inter) {
    const Tensor one = Tensor::scalar(1.0);
    return ops::add(ops::add(one, intra(ctx.intra)), inter(ctx.inter));
}

Tensor gen_offsets(const ContextVectors& ctx, const TwoLayerNet& psi, std::size_t bound) {
    const Tensor context = ops::concat({ctx.intra, ctx.inter}, 1);
    return ops::scale(ops::tanh(psi(context)), static_cast<double>(bound));
}

PatchTensor3D deform_conv3d(const PatchTensor3D& pt, const Tensor& base, const Tensor& alpha, const Tensor& delta) {
    const std::size_t n = pt.patches();
    const std::size_t half = pt.half();
    const std::size_t channels = pt.channels();
    if (base.rank() != 3 || base.dim(1) != channels || base.dim(2) != channels) {
        throw DimensionError("W_b " + shape_str(base.shape()) + " does not match C_m=" + std::to_string(channels));
    }
    const std::size_t taps = base.dim(0);
    const Shape expected{n, taps};
    if (alpha.shape() != expected || delta.shape() != expected) {
        throw DimensionError("alpha " + shape_str(alpha.shape()) + " / delta " + shape_str(delta.shape()) +
                             " must be " + shape_str(expected));
    }
    const auto centre = static_cast<double>(taps / 2);
    Tensor out;
    for (std::size_t k = 0; k < taps; ++k) {
        std::vector<double> grid(half);
        for (std::size_t t = 0; t < half; ++t) grid[t] = static_cast<double>(t + k) - centre;
        const Tensor base_positions = Tensor::from({1, 1, half, 1}, std::move(grid));
        const Tensor shift = ops::reshape(ops::select(delta, 1, k), {n, 1, 1, 1});
        const Tensor positions = ops::add(base_positions, shift);  // [N, 1, P/2, 1]
        const Tensor sampled = ops::sample_linear(pt.data, positions, 2);
        const Tensor mixed = ops::matmul(sampled, ops::select(base, 0, k));
        const Tensor gain = ops::reshape(ops::select(alpha, 1, k), {n, 1, 1, 1});
        const Tensor term = ops::mul(mixed, gain);
        out = out.defined() ? ops::add(out, term) : term;
    }
    return PatchTensor3D{out, pt.period, pt.pad_len};
}

DeformOutput apply(const PatchTensor3D& pt, const DeformableKernel& kernel) {
    const ContextVectors ctx = pool_context(pt);
    DeformOutput result;
    result.alpha = gen_alpha(ctx, kernel.alpha_intra, kernel.alpha_inter);
    result.delta = gen_offsets(ctx, kernel.offset, kernel.offset_bound);
    result.features = deform_conv3d(pt, kernel.base, result.alpha, result.delta);
    return result;
}

}  // namespace msdft::deformable
