#include "voxalign/tensor.hpp"

#include <sstream>
#include <stdexcept>

#include "voxalign/common.hpp"

namespace voxalign {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->data.assign(shape_numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::numel() const { return impl_->data.size(); }
std::size_t Tensor::rank() const { return impl_->shape.size(); }
bool Tensor::requires_grad() const { return impl_->requires_grad; }
bool Tensor::is_leaf() const { return impl_->is_leaf; }

std::vector<double>& Tensor::data() { return impl_->data; }
const std::vector<double>& Tensor::data() const { return impl_->data; }

double Tensor::value() const {
    if (numel() != 1) {
        throw ShapeError("value() requires a scalar tensor, got shape " +
                         shape_str(impl_->shape));
    }
    return impl_->data[0];
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::vector<double>& Tensor::grad() {
    if (!impl_->requires_grad) {
        throw std::logic_error("grad requested on a tensor without requires_grad");
    }
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (impl_->grad.empty()) {
        throw std::logic_error("grad absent on tensor");
    }
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) {
        impl_->grad.assign(impl_->data.size(), 0.0);
    }
}

namespace {
thread_local Tape* t_current_tape = nullptr;
}

Tape* Tape::current() { return t_current_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(t_current_tape) {
    t_current_tape = &tape;
}

TapeScope::~TapeScope() { t_current_tape = previous_; }

void Tape::record(const char* op, const Tensor& output,
                  std::function<void()> backward_fn) {
    records_.push_back(Record{op, output.handle(), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss");
    }
    // Intermediate grads are transient per backward call; leaf grads persist
    // and accumulate across calls.
    for (auto& rec : records_) {
        auto* out = rec.output.get();
        if (!out->is_leaf && !out->grad.empty()) {
            out->grad.assign(out->data.size(), 0.0);
        }
    }
    auto* loss_impl = loss.impl();
    if (loss_impl->requires_grad) {
        if (loss_impl->grad.empty()) loss_impl->grad.assign(1, 0.0);
        loss_impl->grad[0] += 1.0;
    }
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        it->backward();
    }
}

namespace detail {

void accumulate_grad(TensorImpl* t, const std::vector<double>& src) {
    if (!t->requires_grad) return;
    if (src.size() != t->data.size()) {
        throw ShapeError("gradient size mismatch");
    }
    if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
    for (std::size_t i = 0; i < src.size(); ++i) t->grad[i] += src[i];
}

}  // namespace detail

}  // namespace voxalign
