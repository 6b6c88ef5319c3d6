#include "msdft/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "msdft/errors.hpp"

namespace msdft::ops {

namespace {

using Vec = std::vector<double>;

Vec& data_of(const Tensor& t) { return TensorAccess::data(t); }
Vec& grad_of(const Tensor& t) { return TensorAccess::grad(t); }

// Creates the output tensor and, if needed, records the node that owns the
// backward closure.
template <typename Backward>
Tensor finish(const char* op, std::vector<Tensor> inputs, Shape shape, Vec values, Backward&& bw) {
    Tensor out = TensorAccess::make(std::move(shape), std::move(values));
    Tape* tape = Tape::active();
    bool needs = false;
    for (const auto& t : inputs) needs = needs || t.requires_grad();
    if (tape != nullptr && needs) {
        out.set_requires_grad(true);
        TapeNode node;
        node.op = op;
        node.inputs = std::move(inputs);
        node.output = out;
        node.backward = std::forward<Backward>(bw);
        tape->record(std::move(node));
    }
    return out;
}

Shape strides_of(const Shape& shape) {
    Shape strides(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
    return strides;
}

// Strides of `in` expressed over the axes of `out` (right-aligned), with 0 on
// broadcast axes.
Shape broadcast_strides(const Shape& in, const Shape& out) {
    Shape result(out.size(), 0);
    Shape in_strides = strides_of(in);
    std::size_t offset = out.size() - in.size();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] != 1) result[offset + i] = in_strides[i];
    }
    return result;
}

// Calls fn(out_index, a_offset, b_offset) for every element of `out_shape`.
template <typename Fn>
void for_each_broadcast(const Shape& out_shape, const Shape& a_strides, const Shape& b_strides, Fn&& fn) {
    const std::size_t rank = out_shape.size();
    const std::size_t total = numel_of(out_shape);
    if (rank == 0) {
        fn(0, 0, 0);
        return;
    }
    // innermost axis handled as a tight loop
    const std::size_t inner = out_shape[rank - 1];
    const std::size_t as = a_strides[rank - 1];
    const std::size_t bs = b_strides[rank - 1];
    std::vector<std::size_t> counter(rank, 0);
    std::size_t a_off = 0;
    std::size_t b_off = 0;
    for (std::size_t flat = 0; flat < total; flat += inner) {
        for (std::size_t j = 0; j < inner; ++j) fn(flat + j, a_off + j * as, b_off + j * bs);
        for (std::size_t axis = rank - 1; axis-- > 0;) {
            ++counter[axis];
            a_off += a_strides[axis];
            b_off += b_strides[axis];
            if (counter[axis] < out_shape[axis]) break;
            a_off -= a_strides[axis] * counter[axis];
            b_off -= b_strides[axis] * counter[axis];
            counter[axis] = 0;
        }
    }
}

std::size_t check_axis(const Tensor& x, std::size_t axis, const char* op) {
    if (axis >= x.rank()) {
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                             shape_str(x.shape()));
    }
    return axis;
}

// outer x axis x inner decomposition used by axis-wise ops
struct AxisSplit {
    std::size_t outer = 1;
    std::size_t extent = 1;
    std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    const Vec& av = data_of(a);
    const Vec& bv = data_of(b);
    Vec out(numel_of(out_shape));
    const bool same = a.shape() == b.shape();
    const Shape as = broadcast_strides(a.shape(), out_shape);
    const Shape bs = broadcast_strides(b.shape(), out_shape);

    auto apply = [&](auto&& op) {
        if (same) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(av[i], bv[i]);
        } else {
            for_each_broadcast(out_shape, as, bs,
                               [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = op(av[ia], bv[ib]); });
        }
    };
    switch (kind) {
        case BinaryKind::kAdd: apply([](double x, double y) { return x + y; }); break;
        case BinaryKind::kSub: apply([](double x, double y) { return x - y; }); break;
        case BinaryKind::kMul: apply([](double x, double y) { return x * y; }); break;
    }

    return finish(name, {a, b}, out_shape, std::move(out), [kind, out_shape, as, bs, same](const TapeNode& n) {
        const Tensor& a = n.inputs[0];
        const Tensor& b = n.inputs[1];
        const Vec& g = grad_of(n.output);
        const bool ga = a.requires_grad();
        const bool gb = b.requires_grad();
        Vec* da = ga ? &grad_of(a) : nullptr;
        Vec* db = gb ? &grad_of(b) : nullptr;
        const Vec& av = data_of(a);
        const Vec& bv = data_of(b);
        auto step = [&](std::size_t o, std::size_t ia, std::size_t ib) {
            const double go = g[o];
            switch (kind) {
                case BinaryKind::kAdd:
                    if (da) (*da)[ia] += go;
                    if (db) (*db)[ib] += go;
                    break;
                case BinaryKind::kSub:
                    if (da) (*da)[ia] += go;
                    if (db) (*db)[ib] -= go;
                    break;
                case BinaryKind::kMul:
                    if (da) (*da)[ia] += go * bv[ib];
                    if (db) (*db)[ib] += go * av[ia];
                    break;
            }
        };
        if (same) {
            for (std::size_t i = 0; i < g.size(); ++i) step(i, i, i);
        } else {
            for_each_broadcast(out_shape, as, bs, step);
        }
    });
}

template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* name, F f, DF df) {
    const Vec& xv = data_of(x);
    Vec out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    return finish(name, {x}, x.shape(), std::move(out), [df](const TapeNode& n) {
        const Tensor& x = n.inputs[0];
        if (!x.requires_grad()) return;
        const Vec& g = grad_of(n.output);
        const Vec& xv = data_of(x);
        const Vec& yv = data_of(n.output);
        Vec& dx = grad_of(x);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * df(xv[i], yv[i]);
    });
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (ea != eb && ea != 1 && eb != 1) {
            throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = std::max(ea, eb);
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kAdd, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kSub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kMul, "mul"); }

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
    return unary(
        x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : data_of(x)) total += v;
    return finish("sum", {x}, {1}, {total}, [](const TapeNode& n) {
        const Tensor& x = n.inputs[0];
        if (!x.requires_grad()) return;
        const double g = grad_of(n.output)[0];
        for (double& d : grad_of(x)) d += g;
    });
}

Tensor mean(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    double total = 0.0;
    for (double v : data_of(x)) total += v;
    return finish("mean", {x}, {1}, {total * inv}, [inv](const TapeNode& n) {
        const Tensor& x = n.inputs[0];
        if (!x.requires_grad()) return;
        const double g = grad_of(n.output)[0] * inv;
        for (double& d : grad_of(x)) d += g;
    });
}

namespace {

Tensor reduce_axis(const Tensor& x, std::size_t axis, bool keepdim, double factor, const char* name) {
    check_axis(x, axis, name);
    const AxisSplit s = split_at(x.shape(), axis);
    const Vec& xv = data_of(x);
    Vec out(s.outer * s.inner, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t e = 0; e < s.extent; ++e) {
            const double* row = xv.data() + (o * s.extent + e) * s.inner;
            double* dst = out.data() + o * s.inner;
            for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
        }
    }
    if (factor != 1.0) {
        for (double& v : out) v *= factor;
    }
    Shape shape = x.shape();
    if (keepdim || shape.size() == 1) {
        shape[axis] = 1;
    } else {
        shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    }
    return finish(name, {x}, std::move(shape), std::move(out), [s, factor](const TapeNode& n) {
        const Tensor& x = n.inputs[0];
        if (!x.requires_grad()) return;
        const Vec& g = grad_of(n.output);
        Vec& dx = grad_of(x);
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t e = 0; e < s.extent; ++e) {
                double* dst = dx.data() + (o * s.extent + e) * s.inner;
                const double* src = g.data() + o * s.inner;
                for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * factor;
            }
        }
    });
}

}  // namespace

Tensor sum(const Tensor& x, std::size_t axis, bool keepdim) { return reduce_axis(x, axis, keepdim, 1.0, "sum_axis"); }

Tensor mean(const Tensor& x, std::size_t axis, bool keepdim) {
    check_axis(x, axis, "mean_axis");
    return reduce_axis(x, axis, keepdim, 1.0 / static_cast<double>(x.dim(axis)), "mean_axis");
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel_of(shape) != x.numel()) {
        throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
    }
    for (auto e : shape) {
        if (e == 0) throw DimensionError("reshape to empty extent " + shape_str(shape));
    }
    return finish("reshape", {x}, std::move(shape), data_of(x), [](const TapeNode& n) {
        const Tensor& x = n.inputs[0];
        if (!x.requires_grad()) return;
        const Vec& g = grad_of(n.output);
        Vec& dx = grad_of(x);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
    check_axis(x, axis, "slice");
    if (length == 0 || start + length > x.dim(axis)) {
        throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") out of range for axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
    }
    const AxisSplit s = split_at(x.shape(), axis);
    const Vec& xv = data_of(x);
    Vec out(s.outer * length * s.inner);
    const std::size_t block = length * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
        const double* src = xv.data() + (o * s.extent + start) * s.inner;
        std::copy(src, src + block, out.data() + o * block);
    }
    Shape shape = x.shape();
    shape[axis] = length;
    return finish("slice", {x}, std::move(shape), std::move(out), [s, start, block](const TapeNode& n) {
        const Tensor& x = n.inputs[0];
        if (!x.requires_grad()) return;
        const Vec& g = grad_of(n.output);
        Vec& dx = grad_of(x);
        for (std::size_t o = 0; o < s.outer; ++o) {
            double* dst = dx.data() + (o * s.extent + start) * s.inner;
            const double* src = g.data() + o * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
    });
}

Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
    Tensor part = slice(x, axis, index, 1);
    if (x.rank() == 1) return part;
    Shape shape = x.shape();
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    return reshape(part, std::move(shape));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat of zero tensors");
    check_axis(parts[0], axis, "concat");
    Shape shape = parts[0].shape();
    std::size_t total_extent = 0;
    for (const auto& p : parts) {
        Shape other = p.shape();
        if (other.size() != shape.size()) throw DimensionError("concat rank mismatch " + shape_str(other));
        other[axis] = shape[axis];
        if (other != shape) {
            throw DimensionError("concat shape mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
        }
        total_extent += p.dim(axis);
    }
    shape[axis] = total_extent;
    const AxisSplit s = split_at(shape, axis);
    Vec out(numel_of(shape));
    std::vector<std::size_t> offsets;
    std::size_t running = 0;
    for (const auto& p : parts) {
        offsets.push_back(running);
        const std::size_t block = p.dim(axis) * s.inner;
        const Vec& pv = data_of(p);
        for (std::size_t o = 0; o < s.outer; ++o) {
            std::copy(pv.data() + o * block, pv.data() + (o + 1) * block,
                      out.data() + (o * s.extent + running) * s.inner);
        }
        running += p.dim(axis);
    }
    return finish("concat", parts, std::move(shape), std::move(out), [s, axis, offsets](const TapeNode& n) {
        const Vec& g = grad_of(n.output);
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            const Tensor& p = n.inputs[k];
            if (!p.requires_grad()) continue;
            const std::size_t block = p.dim(axis) * s.inner;
            Vec& dp = grad_of(p);
            for (std::size_t o = 0; o < s.outer; ++o) {
                const double* src = g.data() + (o * s.extent + offsets[k]) * s.inner;
                double* dst = dp.data() + o * block;
                for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
            }
        }
    });
}

Tensor stack(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("stack of zero tensors");
    std::vector<Tensor> expanded;
    expanded.reserve(parts.size());
    for (const auto& p : parts) {
        Shape shape = p.shape();
        shape.insert(shape.begin(), 1);
        expanded.push_back(reshape(p, std::move(shape)));
    }
    return concat(expanded, 0);
}

Tensor pad_tail(const Tensor& x, std::size_t axis, std::size_t count) {
    check_axis(x, axis, "pad_tail");
    if (count == 0) return x;
    Shape pad_shape = x.shape();
    pad_shape[axis] = count;
    return concat({x, Tensor::zeros(std::move(pad_shape))}, axis);
}

namespace {

// c[m,n] += a[m,k] * b[k,n]; the k loop is outermost per row so every output
// element accumulates its products in increasing k order.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m,n] += a[m,k] * b[n,k]^T
void gemm_acc_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

// c[k,n] += a[m,k]^T * g[m,n]
void gemm_acc_at(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2) {
        throw DimensionError("matmul needs rank >= 2, got " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const std::size_t m = a.dim(a.rank() - 2);
    const std::size_t k = a.dim(a.rank() - 1);
    const std::size_t kb = b.dim(b.rank() - 2);
    const std::size_t n = b.dim(b.rank() - 1);
    if (k != kb) {
        throw DimensionError("matmul inner extents differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const Shape a_lead(a.shape().begin(), a.shape().end() - 2);
    const Shape b_lead(b.shape().begin(), b.shape().end() - 2);
    Shape lead;
    try {
        lead = broadcast_shape(a_lead, b_lead);
    } catch (const DimensionError&) {
        throw DimensionError("matmul batch extents incompatible: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    Shape out_shape = lead;
    out_shape.push_back(m);
    out_shape.push_back(n);

    // A rank-2 right operand shared by every batch folds the batch into rows.
    const bool fold = b.rank() == 2;
    const std::size_t batches = numel_of(lead);
    std::vector<std::size_t> a_off(batches), b_off(batches);
    if (!fold) {
        const Shape as = broadcast_strides(a_lead.empty() ? Shape{1} : a_lead, lead.empty() ? Shape{1} : lead);
        const Shape bs = broadcast_strides(b_lead.empty() ? Shape{1} : b_lead, lead.empty() ? Shape{1} : lead);
        for_each_broadcast(lead.empty() ? Shape{1} : lead, as, bs, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            a_off[o] = ia;
            b_off[o] = ib;
        });
    }

    const Vec& av = data_of(a);
    const Vec& bv = data_of(b);
    Vec out(numel_of(out_shape), 0.0);
    if (fold) {
        gemm_acc(av.data(), bv.data(), out.data(), batches * m, k, n);
    } else {
        for (std::size_t t = 0; t < batches; ++t) {
            gemm_acc(av.data() + a_off[t] * m * k, bv.data() + b_off[t] * k * n, out.data() + t * m * n, m, k, n);
        }
    }

    return finish("matmul", {a, b}, std::move(out_shape), std::move(out),
                  [fold, batches, m, k, n, a_off, b_off](const TapeNode& node) {
                      const Tensor& a = node.inputs[0];
                      const Tensor& b = node.inputs[1];
                      const Vec& g = grad_of(node.output);
                      const Vec& av = data_of(a);
                      const Vec& bv = data_of(b);
                      if (fold) {
                          if (a.requires_grad()) gemm_acc_bt(g.data(), bv.data(), grad_of(a).data(), batches * m, n, k);
                          if (b.requires_grad()) gemm_acc_at(av.data(), g.data(), grad_of(b).data(), batches * m, k, n);
                          return;
                      }
                      for (std::size_t t = 0; t < batches; ++t) {
                          const double* gt = g.data() + t * m * n;
                          if (a.requires_grad()) {
                              gemm_acc_bt(gt, bv.data() + b_off[t] * k * n, grad_of(a).data() + a_off[t] * m * k, m, n, k);
                          }
                          if (b.requires_grad()) {
                              gemm_acc_at(av.data() + a_off[t] * m * k, gt, grad_of(b).data() + b_off[t] * k * n, m, k, n);
                          }
                      }
                  });
}

Tensor conv1d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t padding) {
    if (x.rank() != 3 || w.rank() != 3) {
        throw DimensionError("conv1d expects x [B,L,C_in] and w [K,C_in,C_out], got " + shape_str(x.shape()) + " and " +
                             shape_str(w.shape()));
    }
    if (stride < 1) throw ConfigError("conv1d stride must be >= 1");
    const std::size_t batch = x.dim(0), len = x.dim(1), cin = x.dim(2);
    const std::size_t kern = w.dim(0), cout = w.dim(2);
    if (w.dim(1) != cin) {
        throw DimensionError("conv1d channel mismatch: x " + shape_str(x.shape()) + " vs w " + shape_str(w.shape()));
    }
    if (len + 2 * padding < kern) {
        throw DimensionError("conv1d kernel " + std::to_string(kern) + " longer than padded input " +
                             std::to_string(len + 2 * padding));
    }
    const std::size_t out_len = (len + 2 * padding - kern) / stride + 1;
    const Vec& xv = data_of(x);
    const Vec& wv = data_of(w);
    Vec out(batch * out_len * cout, 0.0);
    // input row for output position o and tap q, or -1 inside the zero padding
    auto src_row = [=](std::size_t o, std::size_t q) -> std::ptrdiff_t {
        const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(o * stride + q) - static_cast<std::ptrdiff_t>(padding);
        return (t < 0 || t >= static_cast<std::ptrdiff_t>(len)) ? -1 : t;
    };
    for (std::size_t bi = 0; bi < batch; ++bi) {
        for (std::size_t o = 0; o < out_len; ++o) {
            double* dst = out.data() + (bi * out_len + o) * cout;
            for (std::size_t q = 0; q < kern; ++q) {
                const std::ptrdiff_t t = src_row(o, q);
                if (t < 0) continue;
                gemm_acc(xv.data() + (bi * len + static_cast<std::size_t>(t)) * cin, wv.data() + q * cin * cout, dst, 1,
                         cin, cout);
            }
        }
    }
    return finish("conv1d", {x, w}, {batch, out_len, cout}, std::move(out),
                  [=](const TapeNode& node) {
                      const Tensor& x = node.inputs[0];
                      const Tensor& w = node.inputs[1];
                      const Vec& g = grad_of(node.output);
                      const Vec& xv = data_of(x);
                      const Vec& wv = data_of(w);
                      Vec* dx = x.requires_grad() ? &grad_of(x) : nullptr;
                      Vec* dw = w.requires_grad() ? &grad_of(w) : nullptr;
                      for (std::size_t bi = 0; bi < batch; ++bi) {
                          for (std::size_t o = 0; o < out_len; ++o) {
                              const double* go = g.data() + (bi * out_len + o) * cout;
                              for (std::size_t q = 0; q < kern; ++q) {
                                  const std::ptrdiff_t t = src_row(o, q);
                                  if (t < 0) continue;
                                  const std::size_t row = (bi * len + static_cast<std::size_t>(t)) * cin;
                                  if (dx) gemm_acc_bt(go, wv.data() + q * cin * cout, dx->data() + row, 1, cout, cin);
                                  if (dw) gemm_acc_at(xv.data() + row, go, dw->data() + q * cin * cout, 1, cin, cout);
                              }
                          }
                      }
                  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    check_axis(x, axis, "softmax");
    const AxisSplit s = split_at(x.shape(), axis);
    const Vec& xv = data_of(x);
    Vec out(xv.size());
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.extent * s.inner + i;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t e = 0; e < s.extent; ++e) mx = std::max(mx, xv[base + e * s.inner]);
            double total = 0.0;
            for (std::size_t e = 0; e < s.extent; ++e) {
                const double v = std::exp(xv[base + e * s.inner] - mx);
                out[base + e * s.inner] = v;
                total += v;
            }
            for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
        }
    }
    return finish("softmax", {x}, x.shape(), std::move(out), [s](const TapeNode& n) {
        const Tensor& x = n.inputs[0];
        if (!x.requires_grad()) return;
        const Vec& g = grad_of(n.output);
        const Vec& y = data_of(n.output);
        Vec& dx = grad_of(x);
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t i = 0; i < s.inner; ++i) {
                const std::size_t base = o * s.extent * s.inner + i;
                double dot = 0.0;
                for (std::size_t e = 0; e < s.extent; ++e) dot += g[base + e * s.inner] * y[base + e * s.inner];
                for (std::size_t e = 0; e < s.extent; ++e) {
                    const std::size_t idx = base + e * s.inner;
                    dx[idx] += y[idx] * (g[idx] - dot);
                }
            }
        }
    });
}

Tensor sample_linear(const Tensor& x, const Tensor& positions, std::size_t axis) {
    check_axis(x, axis, "sample_linear");
    if (positions.rank() != x.rank()) {
        throw DimensionError("sample_linear positions " + shape_str(positions.shape()) + " must have the rank of x " +
                             shape_str(x.shape()));
    }
    for (double p : positions.data()) {
        if (std::isnan(p)) throw NumericError("sample_linear: NaN sampling position");
    }
    const std::size_t extent = x.dim(axis);
    Shape out_shape;
    try {
        Shape x_probe = x.shape();
        x_probe[axis] = 1;
        out_shape = broadcast_shape(x_probe, positions.shape());
    } catch (const DimensionError&) {
        throw DimensionError("sample_linear: positions " + shape_str(positions.shape()) + " incompatible with x " +
                             shape_str(x.shape()));
    }
    out_shape[axis] = positions.dim(axis);
    for (std::size_t i = 0; i < out_shape.size(); ++i) {
        if (i != axis && x.dim(i) != out_shape[i]) {
            throw DimensionError("sample_linear: positions may not broadcast x " + shape_str(x.shape()));
        }
    }

    // x strides over out axes, with the sampled axis zeroed; the sample index
    // is added separately.
    Shape xs = strides_of(x.shape());
    const std::size_t axis_stride = xs[axis];
    xs[axis] = 0;
    const Shape ps = broadcast_strides(positions.shape(), out_shape);

    const Vec& xv = data_of(x);
    const Vec& pv = data_of(positions);
    Vec out(numel_of(out_shape));
    const double hi = static_cast<double>(extent - 1);
    for_each_broadcast(out_shape, xs, ps, [&](std::size_t o, std::size_t xo, std::size_t po) {
        const double pos = std::clamp(pv[po], 0.0, hi);
        const auto i0 = static_cast<std::size_t>(std::floor(pos));
        const std::size_t i1 = std::min(i0 + 1, extent - 1);
        const double f = pos - static_cast<double>(i0);
        const double x0 = xv[xo + i0 * axis_stride];
        out[o] = f == 0.0 ? x0 : x0 + f * (xv[xo + i1 * axis_stride] - x0);
    });

    return finish("sample_linear", {x, positions}, out_shape, std::move(out),
                  [out_shape, xs, ps, axis_stride, extent, hi](const TapeNode& n) {
                      const Tensor& x = n.inputs[0];
                      const Tensor& positions = n.inputs[1];
                      const Vec& g = grad_of(n.output);
                      const Vec& xv = data_of(x);
                      const Vec& pv = data_of(positions);
                      Vec* dx = x.requires_grad() ? &grad_of(x) : nullptr;
                      Vec* dp = positions.requires_grad() ? &grad_of(positions) : nullptr;
                      for_each_broadcast(out_shape, xs, ps, [&](std::size_t o, std::size_t xo, std::size_t po) {
                          const double raw = pv[po];
                          const double pos = std::clamp(raw, 0.0, hi);
                          const auto i0 = static_cast<std::size_t>(std::floor(pos));
                          const std::size_t i1 = std::min(i0 + 1, extent - 1);
                          const double f = pos - static_cast<double>(i0);
                          const double go = g[o];
                          if (dx) {
                              (*dx)[xo + i0 * axis_stride] += go * (1.0 - f);
                              (*dx)[xo + i1 * axis_stride] += go * f;
                          }
                          if (dp && raw > 0.0 && raw < hi) {
                              (*dp)[po] += go * (xv[xo + i1 * axis_stride] - xv[xo + i0 * axis_stride]);
                          }
                      });
                  });
}

}  // namespace msdft::ops
