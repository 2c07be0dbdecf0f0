#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace voxalign {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    // For leaves this is the user-set trainability flag; for op outputs it is
    // derived (true iff any input requires grad). Gradient buffers are only
    // ever allocated on tensors with requires_grad = true, so frozen leaves
    // keep grad absent while gradients still flow through them.
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<double> grad;  // empty means absent
};

}  // namespace detail

// Value-semantics handle to a shared n-dimensional double buffer. Copies
// alias the same storage, which is what the tape needs to keep a graph alive.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t rank() const;
    bool requires_grad() const;
    bool is_leaf() const;

    std::vector<double>& data();
    const std::vector<double>& data() const;

    // Scalar access; throws unless numel() == 1.
    double value() const;

    bool has_grad() const;
    // Allocates a zeroed gradient buffer on first use; only legal on tensors
    // with requires_grad = true.
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();

    std::shared_ptr<detail::TensorImpl> handle() const { return impl_; }
    detail::TensorImpl* impl() const { return impl_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
        : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;
};

// Records the forward pass as a flat list of backward closures in execution
// order; backward() replays them in reverse. Records are appended only while
// a TapeScope makes the tape current on this thread, and only for ops whose
// output requires grad. A tape is confined to one thread.
class Tape {
public:
    struct Record {
        const char* op;
        std::shared_ptr<detail::TensorImpl> output;
        std::function<void()> backward;
    };

    // Accumulates gradients into every reachable requires-grad leaf. Gradients
    // of intermediate (non-leaf) tensors are transient: they are rezeroed at
    // the start of each call, so calling backward twice doubles leaf
    // gradients, matching the additive-accumulation contract.
    void backward(const Tensor& loss);

    void record(const char* op, const Tensor& output,
                std::function<void()> backward_fn);

    std::size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

    static Tape* current();

private:
    std::vector<Record> records_;
    friend class TapeScope;
};

// RAII activation of a tape on the current thread. Ops executed while no
// tape is active run in inference mode: outputs are plain buffers that never
// require grad.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

namespace detail {
// Accumulation helper shared by backward rules: adds src into t's grad if
// t requires grad, allocating the buffer on demand. No-op on frozen leaves.
void accumulate_grad(TensorImpl* t, const std::vector<double>& src);
}  // namespace detail

}  // namespace voxalign
