#include "msdft/patching.hpp"

#include <string>

#include "msdft/errors.hpp"
#include "msdft/ops.hpp"

namespace msdft::patching {

std::size_t patch_length(std::size_t period) {
    if (period < 2) return 2;
    return period % 2 == 0 ? period : period + 1;
}

std::size_t patch_count(std::size_t length, std::size_t patch) { return (length + patch - 1) / patch; }

std::size_t pad_length(std::size_t length, std::size_t patch) { return patch_count(length, patch) * patch - length; }

Tensor embed_channels(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2 || x.rank() < 2 || x.dim(x.rank() - 1) != weight.dim(0)) {
        throw DimensionError("embed_channels: x " + shape_str(x.shape()) + " does not conform to W_e " +
                             shape_str(weight.shape()));
    }
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(1)) {
        throw DimensionError("embed_channels: bias " + shape_str(bias.shape()) + " vs W_e " + shape_str(weight.shape()));
    }
    return ops::add(ops::matmul(x, weight), bias);
}

Tensor segment(const Tensor& x_emb, std::size_t patch) {
    if (patch < 2) throw ConfigError("patch length must be >= 2, got " + std::to_string(patch));
    if (x_emb.rank() != 2) throw DimensionError("segment expects [L, C_m], got " + shape_str(x_emb.shape()));
    const std::size_t length = x_emb.dim(0);
    const std::size_t channels = x_emb.dim(1);
    const Tensor padded = ops::pad_tail(x_emb, 0, pad_length(length, patch));
    return ops::reshape(padded, {patch_count(length, patch), patch, channels});
}

Tensor patchify(const Tensor& x_emb, std::size_t patch, const Tensor& weight, const Tensor& bias) {
    const Tensor raw = segment(x_emb, patch);
    const std::size_t n = raw.dim(0);
    const std::size_t channels = raw.dim(2);
    if (weight.rank() != 3 || weight.dim(0) != patch || weight.dim(1) != channels) {
        throw DimensionError("patch conv weight " + shape_str(weight.shape()) + " does not match P=" +
                             std::to_string(patch) + ", C_m=" + std::to_string(channels));
    }
    const Tensor flat = ops::reshape(raw, {1, n * patch, channels});
    Tensor summary = ops::conv1d(flat, weight, patch, 0);  // [1, N, C_out]
    if (bias.defined()) summary = ops::add(summary, bias);
    const std::size_t out_channels = weight.dim(2);
    if (out_channels != channels) {
        throw DimensionError("patch conv must preserve width C_m, got " + shape_str(weight.shape()));
    }
    return ops::add(raw, ops::reshape(summary, {n, 1, channels}));
}

PatchTensor3D reshape_3d(const Tensor& patches, std::size_t pad_len) {
    if (patches.rank() != 3) throw DimensionError("reshape_3d expects [N, P, C_m], got " + shape_str(patches.shape()));
    const std::size_t patch = patches.dim(1);
    if (patch % 2 != 0) throw ContractError("reshape_3d needs an even patch length, got " + std::to_string(patch));
    if (pad_len >= patch) throw ContractError("pad_len must be smaller than the patch length");
    PatchTensor3D pt;
    pt.data = ops::reshape(patches, {patches.dim(0), 2, patch / 2, patches.dim(2)});
    pt.period = patch;
    pt.pad_len = pad_len;
    return pt;
}

Tensor unpatchify(const PatchTensor3D& pt, std::size_t length) {
    const std::size_t n = pt.patches();
    const std::size_t patch = 2 * pt.half();
    if (patch != pt.period || n * patch - pt.pad_len != length) {
        throw ContractError("unpatchify: L=" + std::to_string(length) + " inconsistent with N=" + std::to_string(n) +
                            ", P=" + std::to_string(pt.period) + ", pad_len=" + std::to_string(pt.pad_len));
    }
    const Tensor flat = ops::reshape(pt.data, {n * patch, pt.channels()});
    return pt.pad_len == 0 ? flat : ops::slice(flat, 0, 0, length);
}

}  // namespace msdft::patching
