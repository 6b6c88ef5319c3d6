#pragma once

#include <vector>

#include "msdft/tensor.hpp"

// Differentiable tensor operations. Every op records a TapeNode on the active
// tape when one of its inputs requires a gradient; otherwise it is a plain
// forward computation. Binary ops broadcast numpy-style (right-aligned, extents
// equal or 1).
namespace msdft::ops {

Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor relu(const Tensor& x);  // relu'(0) = 0
Tensor tanh(const Tensor& x);

Tensor sum(const Tensor& x);   // -> shape [1]
Tensor mean(const Tensor& x);  // -> shape [1]
Tensor sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdim = false);

Tensor reshape(const Tensor& x, Shape shape);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
/// slice of length 1 with the axis removed (rank-1 inputs keep a [1] shape)
Tensor select(const Tensor& x, std::size_t axis, std::size_t index);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);
/// Appends `count` zero rows at the end of `axis`.
Tensor pad_tail(const Tensor& x, std::size_t axis, std::size_t count);

/// [..., m, k] x [..., k, n] -> [..., m, n]; leading extents broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

/**
 * 1-D cross-correlation (no kernel flip) with zero padding.
 * x: [B, L, C_in], w: [K, C_in, C_out] -> [B, L_out, C_out],
 * L_out = floor((L + 2*padding - K) / stride) + 1.
 */
Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t padding);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);

/**
 * Linear interpolation of `x` along `axis` at fractional `positions`.
 *
 * `positions` has the rank of `x`; its extent on `axis` is the number of
 * samples drawn and every other extent is 1 or matches the broadcast result.
 * Positions are clamped to [0, T-1]. Gradients reach both `x` and `positions`;
 * d out / d position is the neighbour difference x[i+1] - x[i] inside the
 * range and 0 where clamping is active.
 */
Tensor sample_linear(const Tensor& x, const Tensor& positions, std::size_t axis);

}  // namespace msdft::ops
