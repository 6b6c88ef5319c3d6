#pragma once

#include <cstddef>

#include "msdft/tensor.hpp"

namespace msdft::patching {

/// One scale of the embedded window split into N patches of two stacked
/// sub-patches: data is [N, 2, P/2, C_m].
struct PatchTensor3D {
    Tensor data;
    std::size_t period = 0;   // patch length P actually used (even)
    std::size_t pad_len = 0;  // zero rows appended after the last timestep

    std::size_t patches() const { return data.dim(0); }
    std::size_t half() const { return data.dim(2); }
    std::size_t channels() const { return data.dim(3); }
};

/// Patch length for a detected period: odd periods round up to the next even
/// length, and the minimum is 2.
std::size_t patch_length(std::size_t period);
std::size_t patch_count(std::size_t length, std::size_t patch);
std::size_t pad_length(std::size_t length, std::size_t patch);

/// Per-timestep affine map x W_e + b_e: [..., L, C] -> [..., L, C_m].
Tensor embed_channels(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Raw segmentation [L, C_m] -> [N, P, C_m] with tail zero padding.
Tensor segment(const Tensor& x_emb, std::size_t patch);

/**
 * Raw segmentation plus a per-patch Conv1D summary (kernel P, stride P) added
 * to every position of its patch. `weight` is [P, C_m, C_m]; `bias` is
 * optional ([C_m]).
 */
Tensor patchify(const Tensor& x_emb, std::size_t patch, const Tensor& weight, const Tensor& bias = Tensor());

/// [N, P, C_m] -> [N, 2, P/2, C_m]. Pure re-indexing: sub-patch 0 holds steps
/// [0, P/2) and sub-patch 1 holds [P/2, P).
PatchTensor3D reshape_3d(const Tensor& patches, std::size_t pad_len);

/// Inverse of reshape_3d followed by patch concatenation, dropping the padding.
Tensor unpatchify(const PatchTensor3D& pt, std::size_t length);

}  // namespace msdft::patching
