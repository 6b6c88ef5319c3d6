#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace msdft {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
}

/**
 * Dense row-major tensor of doubles.
 *
 * A Tensor is a shared handle: copies alias the same storage, the way
 * framework tensors behave. Use clone() for an independent deep copy.
 * Gradient storage is allocated lazily the first time backward writes to it.
 */
class Tensor {
public:
    Tensor();

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    /// Mutates storage in place; not recorded on any tape.
    std::span<double> mutable_data();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool value);

    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Deep copy of the values; the result is a fresh leaf without gradient.
    Tensor clone() const;
    /// Same as clone() but keeps the requires_grad flag.
    Tensor clone_leaf() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);
    std::shared_ptr<detail::TensorImpl> impl_;

    friend struct TensorAccess;
};

/// One recorded operation: inputs, output and the closure that propagates the
/// output gradient back into the inputs.
struct TapeNode {
    const char* op = "";
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(const TapeNode&)> backward;
};

/**
 * Append-only record of differentiable operations.
 *
 * Constructing a Tape makes it the active tape of the current thread until it
 * is destroyed (tapes nest like a stack). Operations only record when a tape is
 * active and at least one input requires a gradient. Each thread has its own
 * active-tape stack, so independent tapes may run concurrently.
 */
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(TapeNode node);
    std::size_t size() const { return nodes_.size(); }
    const std::vector<TapeNode>& nodes() const { return nodes_; }

    /// Seeds d loss / d loss = 1 and walks the nodes in reverse order.
    /// Gradients accumulate; callers zero parameter grads between steps.
    void backward(const Tensor& loss);

private:
    std::vector<TapeNode> nodes_;
    Tape* previous_ = nullptr;
};

/// Runs backward on the thread's active tape.
void backward(const Tensor& loss);

/// Non-owning accessors used by op implementations.
struct TensorAccess {
    static std::vector<double>& data(const Tensor& t);
    static std::vector<double>& grad(const Tensor& t);  // allocates on first use
    static bool grad_allocated(const Tensor& t);
    static Tensor make(Shape shape, std::vector<double> values);
};

}  // namespace msdft
