#include "msdft/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "msdft/errors.hpp"

namespace msdft {

namespace detail {
struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
};
}  // namespace detail

std::size_t numel_of(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
    for (auto e : shape) {
        if (e == 0) throw DimensionError("tensor extents must be >= 1, got " + shape_str(shape));
    }
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tensor::Tensor() = default;
Tensor::Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    validate_shape(shape);
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->data.assign(numel_of(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    validate_shape(shape);
    if (numel_of(shape) != values.size()) {
        throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(numel_of(shape)) +
                             " values, got " + std::to_string(values.size()));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= impl_->shape.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(impl_->shape));
    }
    return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }
std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    const auto& s = impl_->shape;
    if (index.size() != s.size()) throw DimensionError("index rank mismatch for " + shape_str(s));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= s[axis]) throw DimensionError("index out of range for " + shape_str(s));
        flat = flat * s[axis] + i;
        ++axis;
    }
    return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::mutable_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return from(impl_->shape, impl_->data, false); }
Tensor Tensor::clone_leaf() const { return from(impl_->shape, impl_->data, impl_->requires_grad); }

std::vector<double>& TensorAccess::data(const Tensor& t) { return t.impl_->data; }

std::vector<double>& TensorAccess::grad(const Tensor& t) {
    auto& g = t.impl_->grad;
    if (g.empty()) g.assign(t.impl_->data.size(), 0.0);
    return g;
}

bool TensorAccess::grad_allocated(const Tensor& t) { return !t.impl_->grad.empty(); }

Tensor TensorAccess::make(Shape shape, std::vector<double> values) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    return Tensor(std::move(impl));
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(TapeNode node) { nodes_.push_back(std::move(node)); }

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward needs a scalar loss, got " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    if (nodes_.empty()) throw ContractError("backward on an empty tape");
    TensorAccess::grad(loss)[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!TensorAccess::grad_allocated(it->output)) continue;
        it->backward(*it);
    }
}

void backward(const Tensor& loss) {
    Tape* tape = Tape::active();
    if (tape == nullptr) throw ContractError("backward called with no active tape");
    tape->backward(loss);
}

}  // namespace msdft
