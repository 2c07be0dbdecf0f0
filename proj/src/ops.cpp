#include "voxalign/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "voxalign/common.hpp"

namespace voxalign::ops {

namespace {

using detail::TensorImpl;
using Handle = std::shared_ptr<TensorImpl>;

bool g_inject_grad_fault = false;

void check_output(const char* op, const Tensor& y) {
    for (double v : y.data()) {
        if (std::isnan(v)) {
            throw NumericError(std::string(op) + " produced NaN");
        }
    }
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (Tape::current() == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void mark_as_output(const Tensor& y) {
    y.impl()->requires_grad = true;
    y.impl()->is_leaf = false;
}

// Grad buffer of t if grads are wanted there, else nullptr. Allocates zeros
// on first use.
std::vector<double>* grad_dst(TensorImpl* t) {
    if (!t->requires_grad) return nullptr;
    if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
    return &t->grad;
}

// Output gradient, or nullptr when no loss reached this record.
const std::vector<double>* out_grad(TensorImpl* t) {
    return t->grad.empty() ? nullptr : &t->grad;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + " tensor, got shape " +
                         shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

template <typename Fwd, typename Dfn>
Tensor unary_elementwise(const char* op, const Tensor& x, Fwd fwd, Dfn dval) {
    const auto& xd = x.data();
    std::vector<double> out(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
    Tensor y = Tensor::from_data(x.shape(), std::move(out));
    check_output(op, y);
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record(op, y, [xi = x.handle(), yi = y.handle(), dval]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (std::size_t i = 0; i < g->size(); ++i) {
                (*gx)[i] += (*g)[i] * dval(xi->data[i], yi->data[i]);
            }
        });
    }
    return y;
}

}  // namespace

void set_gradient_fault_injection(bool enabled) { g_inject_grad_fault = enabled; }
bool gradient_fault_injection() { return g_inject_grad_fault; }

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    Tensor y = Tensor::from_data(a.shape(), std::move(out));
    check_output("add", y);
    if (should_record({&a, &b})) {
        mark_as_output(y);
        Tape::current()->record("add", y, [ai = a.handle(), bi = b.handle(),
                                           yi = y.handle()]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            if (auto* ga = grad_dst(ai.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) (*ga)[i] += (*g)[i];
            }
            if (auto* gb = grad_dst(bi.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) (*gb)[i] += (*g)[i];
            }
        });
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
    Tensor y = Tensor::from_data(a.shape(), std::move(out));
    check_output("sub", y);
    if (should_record({&a, &b})) {
        mark_as_output(y);
        Tape::current()->record("sub", y, [ai = a.handle(), bi = b.handle(),
                                           yi = y.handle()]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            if (auto* ga = grad_dst(ai.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) (*ga)[i] += (*g)[i];
            }
            if (auto* gb = grad_dst(bi.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) (*gb)[i] -= (*g)[i];
            }
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    Tensor y = Tensor::from_data(a.shape(), std::move(out));
    check_output("mul", y);
    if (should_record({&a, &b})) {
        mark_as_output(y);
        Tape::current()->record("mul", y, [ai = a.handle(), bi = b.handle(),
                                           yi = y.handle()]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            if (auto* ga = grad_dst(ai.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) {
                    (*ga)[i] += (*g)[i] * bi->data[i];
                }
            }
            if (auto* gb = grad_dst(bi.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) {
                    (*gb)[i] += (*g)[i] * ai->data[i];
                }
            }
        });
    }
    return y;
}

Tensor scale(const Tensor& x, double c) {
    return unary_elementwise(
        "scale", x, [c](double v) { return v * c; },
        [c](double, double) { return c; });
}

Tensor relu(const Tensor& x) {
    const auto& xd = x.data();
    std::vector<double> out(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
    Tensor y = Tensor::from_data(x.shape(), std::move(out));
    check_output("relu", y);
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("relu", y, [xi = x.handle(), yi = y.handle()]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            const double fault = g_inject_grad_fault ? 1.01 : 1.0;
            for (std::size_t i = 0; i < g->size(); ++i) {
                if (xi->data[i] > 0.0) (*gx)[i] += fault * (*g)[i];
            }
        });
    }
    return y;
}

Tensor tanh_op(const Tensor& x) {
    return unary_elementwise(
        "tanh", x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor exp_op(const Tensor& x) {
    return unary_elementwise(
        "exp", x, [](double v) { return std::exp(v); },
        [](double, double y) { return y; });
}

Tensor log_op(const Tensor& x) {
    for (double v : x.data()) {
        if (!(v > 0.0)) {
            throw NumericError("log requires strictly positive input, got " +
                               std::to_string(v));
        }
    }
    return unary_elementwise(
        "log", x, [](double v) { return std::log(v); },
        [](double xv, double) { return 1.0 / xv; });
}

Tensor softplus(const Tensor& x) {
    return unary_elementwise(
        "softplus", x,
        [](double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); },
        [](double xv, double) { return 1.0 / (1.0 + std::exp(-xv)); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
    return unary_elementwise(
        "clamp", x,
        [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](double xv, double) { return (xv >= lo && xv <= hi) ? 1.0 : 0.0; });
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
    require_rank(x, 2, "add_rowvec");
    require_rank(bias, 1, "add_rowvec");
    const std::size_t n = x.shape()[0];
    const std::size_t m = x.shape()[1];
    if (bias.shape()[0] != m) {
        throw ShapeError("add_rowvec: bias length " + shape_str(bias.shape()) +
                         " does not match row width of " + shape_str(x.shape()));
    }
    std::vector<double> out(x.numel());
    const auto& xd = x.data();
    const auto& bd = bias.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = xd[i * m + j] + bd[j];
    }
    Tensor y = Tensor::from_data(x.shape(), std::move(out));
    check_output("add_rowvec", y);
    if (should_record({&x, &bias})) {
        mark_as_output(y);
        Tape::current()->record("add_rowvec", y, [xi = x.handle(),
                                                  bi = bias.handle(),
                                                  yi = y.handle(), n, m]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            if (auto* gx = grad_dst(xi.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) (*gx)[i] += (*g)[i];
            }
            if (auto* gb = grad_dst(bi.get())) {
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < m; ++j) (*gb)[j] += (*g)[i * m + j];
                }
            }
        });
    }
    return y;
}

Tensor bias_add_channels(const Tensor& x, const Tensor& bias) {
    require_rank(x, 4, "bias_add_channels");
    require_rank(bias, 1, "bias_add_channels");
    const std::size_t c = x.shape()[0];
    if (bias.shape()[0] != c) {
        throw ShapeError("bias_add_channels: bias length " +
                         shape_str(bias.shape()) + " vs channels of " +
                         shape_str(x.shape()));
    }
    const std::size_t spatial = x.numel() / c;
    std::vector<double> out(x.numel());
    const auto& xd = x.data();
    const auto& bd = bias.data();
    for (std::size_t ci = 0; ci < c; ++ci) {
        const double b = bd[ci];
        for (std::size_t s = 0; s < spatial; ++s) {
            out[ci * spatial + s] = xd[ci * spatial + s] + b;
        }
    }
    Tensor y = Tensor::from_data(x.shape(), std::move(out));
    check_output("bias_add_channels", y);
    if (should_record({&x, &bias})) {
        mark_as_output(y);
        Tape::current()->record("bias_add_channels", y,
                                [xi = x.handle(), bi = bias.handle(),
                                 yi = y.handle(), c, spatial]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            if (auto* gx = grad_dst(xi.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) (*gx)[i] += (*g)[i];
            }
            if (auto* gb = grad_dst(bi.get())) {
                for (std::size_t ci = 0; ci < c; ++ci) {
                    double acc = 0.0;
                    for (std::size_t s = 0; s < spatial; ++s) {
                        acc += (*g)[ci * spatial + s];
                    }
                    (*gb)[ci] += acc;
                }
            }
        });
    }
    return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t n = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const std::size_t m = b.shape()[1];
    if (b.shape()[0] != k) {
        throw ShapeError("matmul: inner dimensions disagree, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    std::vector<double> out(n * m, 0.0);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = ad[i * k + kk];
            const double* brow = bd.data() + kk * m;
            double* orow = out.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    Tensor y = Tensor::from_data({n, m}, std::move(out));
    check_output("matmul", y);
    if (should_record({&a, &b})) {
        mark_as_output(y);
        Tape::current()->record("matmul", y, [ai = a.handle(), bi = b.handle(),
                                              yi = y.handle(), n, k, m]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            if (auto* ga = grad_dst(ai.get())) {
                // dA = G * B^T
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const double* grow = g->data() + i * m;
                        const double* brow = bi->data.data() + kk * m;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
                        (*ga)[i * k + kk] += acc;
                    }
                }
            }
            if (auto* gb = grad_dst(bi.get())) {
                // dB = A^T * G
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double* gbrow = gb->data() + kk * m;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double av = ai->data[i * k + kk];
                        const double* grow = g->data() + i * m;
                        for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
                    }
                }
            }
        });
    }
    return y;
}

Tensor transpose(const Tensor& x) {
    require_rank(x, 2, "transpose");
    const std::size_t n = x.shape()[0];
    const std::size_t m = x.shape()[1];
    std::vector<double> out(n * m);
    const auto& xd = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[j * n + i] = xd[i * m + j];
    }
    Tensor y = Tensor::from_data({m, n}, std::move(out));
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("transpose", y, [xi = x.handle(),
                                                 yi = y.handle(), n, m]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    (*gx)[i * m + j] += (*g)[j * n + i];
                }
            }
        });
    }
    return y;
}

namespace {

// Range of output coordinates o for which i = o*stride + k - pad lies in
// [0, in_extent), clamped to [0, out_extent).
struct AxisRange {
    std::size_t lo, hi;  // half-open
};

AxisRange valid_out_range(std::size_t in_extent, std::size_t out_extent,
                          std::size_t stride, std::size_t k, std::size_t pad) {
    const std::int64_t off = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(pad);
    const std::int64_t s = static_cast<std::int64_t>(stride);
    std::int64_t lo = 0;
    if (off < 0) lo = (-off + s - 1) / s;  // ceil(-off / s)
    std::int64_t hi = (static_cast<std::int64_t>(in_extent) - 1 - off) / s + 1;
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(out_extent));
    if (hi < lo) hi = lo;
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

struct ConvDims {
    std::size_t cin, din, hin, win;
    std::size_t cout, kd, kh, kw;
    std::size_t dout, hout, wout;
};

ConvDims conv_dims(const Shape& input, const Shape& kernel,
                   const std::array<std::size_t, 3>& stride,
                   const std::array<std::size_t, 3>& pad) {
    if (input.size() != 4) {
        throw ShapeError("conv3d: input must be rank 4 (C,D,H,W), got " +
                         shape_str(input));
    }
    if (kernel.size() != 5) {
        throw ShapeError("conv3d: kernel must be rank 5 (Co,Ci,kD,kH,kW), got " +
                         shape_str(kernel));
    }
    if (kernel[1] != input[0]) {
        throw ShapeError("conv3d: input channels " + std::to_string(input[0]) +
                         " do not match kernel C_in " + std::to_string(kernel[1]) +
                         " (input " + shape_str(input) + ", kernel " +
                         shape_str(kernel) + ")");
    }
    for (std::size_t s : stride) {
        if (s == 0) throw ShapeError("conv3d: zero stride");
    }
    ConvDims d{};
    d.cin = input[0];
    d.din = input[1];
    d.hin = input[2];
    d.win = input[3];
    d.cout = kernel[0];
    d.kd = kernel[2];
    d.kh = kernel[3];
    d.kw = kernel[4];
    const std::size_t ins[3] = {d.din, d.hin, d.win};
    const std::size_t ks[3] = {d.kd, d.kh, d.kw};
    std::size_t outs[3];
    for (int a = 0; a < 3; ++a) {
        const std::int64_t padded =
            static_cast<std::int64_t>(ins[a]) + 2 * static_cast<std::int64_t>(pad[a]) -
            static_cast<std::int64_t>(ks[a]);
        if (padded < 0) {
            throw ShapeError("conv3d: kernel larger than padded input on axis " +
                             std::to_string(a));
        }
        outs[a] = static_cast<std::size_t>(padded) / stride[a] + 1;
        if (outs[a] < 1) {
            throw ShapeError("conv3d: empty output on axis " + std::to_string(a));
        }
    }
    d.dout = outs[0];
    d.hout = outs[1];
    d.wout = outs[2];
    return d;
}

}  // namespace

Shape conv3d_output_shape(const Shape& input, const Shape& kernel,
                          std::array<std::size_t, 3> stride,
                          std::array<std::size_t, 3> pad) {
    const ConvDims d = conv_dims(input, kernel, stride, pad);
    return {d.cout, d.dout, d.hout, d.wout};
}

Tensor conv3d(const Tensor& input, const Tensor& kernel,
              std::array<std::size_t, 3> stride, std::array<std::size_t, 3> pad) {
    const ConvDims d = conv_dims(input.shape(), kernel.shape(), stride, pad);
    const std::size_t sd = stride[0], sh = stride[1], sw = stride[2];
    const std::size_t pd = pad[0], ph = pad[1], pw = pad[2];

    std::vector<double> out(d.cout * d.dout * d.hout * d.wout, 0.0);
    const double* in = input.data().data();
    const double* ker = kernel.data().data();

    // axpy-style accumulation: kernel taps outermost, contiguous width loop
    // innermost (stride-1 width in every configuration used here).
    for (std::size_t co = 0; co < d.cout; ++co) {
        for (std::size_t ci = 0; ci < d.cin; ++ci) {
            const double* kbase = ker + ((co * d.cin + ci) * d.kd) * d.kh * d.kw;
            for (std::size_t kd = 0; kd < d.kd; ++kd) {
                const AxisRange rd = valid_out_range(d.din, d.dout, sd, kd, pd);
                for (std::size_t kh = 0; kh < d.kh; ++kh) {
                    const AxisRange rh = valid_out_range(d.hin, d.hout, sh, kh, ph);
                    for (std::size_t kw = 0; kw < d.kw; ++kw) {
                        const AxisRange rw = valid_out_range(d.win, d.wout, sw, kw, pw);
                        const double w = kbase[(kd * d.kh + kh) * d.kw + kw];
                        if (w == 0.0) continue;
                        for (std::size_t od = rd.lo; od < rd.hi; ++od) {
                            const std::size_t id = od * sd + kd - pd;
                            for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
                                const std::size_t ih = oh * sh + kh - ph;
                                const double* irow =
                                    in + ((ci * d.din + id) * d.hin + ih) * d.win;
                                double* orow =
                                    out.data() +
                                    ((co * d.dout + od) * d.hout + oh) * d.wout;
                                if (sw == 1) {
                                    const double* ip = irow + (rw.lo + kw - pw);
                                    for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                        orow[ow] += w * ip[ow - rw.lo];
                                    }
                                } else {
                                    for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                        orow[ow] += w * irow[ow * sw + kw - pw];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    Tensor y = Tensor::from_data({d.cout, d.dout, d.hout, d.wout}, std::move(out));
    check_output("conv3d", y);
    if (should_record({&input, &kernel})) {
        mark_as_output(y);
        Tape::current()->record("conv3d", y, [ii = input.handle(),
                                              ki = kernel.handle(),
                                              yi = y.handle(), d, sd, sh, sw, pd,
                                              ph, pw]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            const double* gp = g->data();
            auto* gin = grad_dst(ii.get());
            auto* gker = grad_dst(ki.get());
            for (std::size_t co = 0; co < d.cout; ++co) {
                for (std::size_t ci = 0; ci < d.cin; ++ci) {
                    const std::size_t kslab = ((co * d.cin + ci) * d.kd) * d.kh * d.kw;
                    for (std::size_t kd = 0; kd < d.kd; ++kd) {
                        const AxisRange rd = valid_out_range(d.din, d.dout, sd, kd, pd);
                        for (std::size_t kh = 0; kh < d.kh; ++kh) {
                            const AxisRange rh = valid_out_range(d.hin, d.hout, sh, kh, ph);
                            for (std::size_t kw = 0; kw < d.kw; ++kw) {
                                const AxisRange rw = valid_out_range(d.win, d.wout, sw, kw, pw);
                                const std::size_t kidx = kslab + (kd * d.kh + kh) * d.kw + kw;
                                const double w = ki->data[kidx];
                                double wacc = 0.0;
                                for (std::size_t od = rd.lo; od < rd.hi; ++od) {
                                    const std::size_t id = od * sd + kd - pd;
                                    for (std::size_t oh = rh.lo; oh < rh.hi; ++oh) {
                                        const std::size_t ih = oh * sh + kh - ph;
                                        const double* grow =
                                            gp + ((co * d.dout + od) * d.hout + oh) * d.wout;
                                        const std::size_t in_off =
                                            ((ci * d.din + id) * d.hin + ih) * d.win;
                                        if (sw == 1) {
                                            const std::size_t base = rw.lo + kw - pw;
                                            if (gin) {
                                                double* girow = gin->data() + in_off + base;
                                                for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                                    girow[ow - rw.lo] += w * grow[ow];
                                                }
                                            }
                                            if (gker) {
                                                const double* irow =
                                                    ii->data.data() + in_off + base;
                                                for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                                    wacc += grow[ow] * irow[ow - rw.lo];
                                                }
                                            }
                                        } else {
                                            for (std::size_t ow = rw.lo; ow < rw.hi; ++ow) {
                                                const std::size_t iw = ow * sw + kw - pw;
                                                if (gin) {
                                                    (*gin)[in_off + iw] += w * grow[ow];
                                                }
                                                if (gker) {
                                                    wacc += grow[ow] * ii->data[in_off + iw];
                                                }
                                            }
                                        }
                                    }
                                }
                                if (gker) (*gker)[kidx] += wacc;
                            }
                        }
                    }
                }
            }
        });
    }
    return y;
}

std::size_t patch_count(const std::array<std::size_t, 3>& dims,
                        const std::array<std::size_t, 3>& patch) {
    static const char* axis_names[3] = {"depth", "height", "width"};
    for (int a = 0; a < 3; ++a) {
        if (patch[a] == 0) {
            throw ShapeError(std::string("patchify: zero patch extent on ") +
                             axis_names[a]);
        }
        if (dims[a] % patch[a] != 0) {
            throw ShapeError(std::string("patchify: ") + axis_names[a] + " " +
                             std::to_string(dims[a]) + " not divisible by patch " +
                             axis_names[a] + " " + std::to_string(patch[a]));
        }
    }
    return (dims[0] / patch[0]) * (dims[1] / patch[1]) * (dims[2] / patch[2]);
}

namespace {

// Flat index mapping shared by patchify / unpatchify: patch n, element e
// of the flattened patch <-> voxel (d,h,w).
struct PatchMap {
    std::size_t gd, gh, gw;  // patch grid
    std::size_t pd, ph, pw;
    std::size_t h, w;

    std::size_t voxel_index(std::size_t n, std::size_t e) const {
        const std::size_t pgw = n % gw;
        const std::size_t pgh = (n / gw) % gh;
        const std::size_t pgd = n / (gw * gh);
        const std::size_t ew = e % pw;
        const std::size_t eh = (e / pw) % ph;
        const std::size_t ed = e / (pw * ph);
        const std::size_t d = pgd * pd + ed;
        const std::size_t hh = pgh * ph + eh;
        const std::size_t ww = pgw * pw + ew;
        return (d * h + hh) * w + ww;
    }
};

PatchMap make_patch_map(const std::array<std::size_t, 3>& dims,
                        const std::array<std::size_t, 3>& patch) {
    PatchMap m{};
    m.gd = dims[0] / patch[0];
    m.gh = dims[1] / patch[1];
    m.gw = dims[2] / patch[2];
    m.pd = patch[0];
    m.ph = patch[1];
    m.pw = patch[2];
    m.h = dims[1];
    m.w = dims[2];
    return m;
}

}  // namespace

Tensor patchify(const Tensor& z, std::array<std::size_t, 3> patch) {
    require_rank(z, 4, "patchify");
    if (z.shape()[0] != 1) {
        throw ShapeError("patchify expects a single-channel volume, got " +
                         shape_str(z.shape()));
    }
    const std::array<std::size_t, 3> dims{z.shape()[1], z.shape()[2], z.shape()[3]};
    const std::size_t n = patch_count(dims, patch);
    const std::size_t psz = patch[0] * patch[1] * patch[2];
    const PatchMap map = make_patch_map(dims, patch);

    std::vector<double> out(n * psz);
    const auto& zd = z.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t e = 0; e < psz; ++e) {
            out[i * psz + e] = zd[map.voxel_index(i, e)];
        }
    }
    Tensor y = Tensor::from_data({n, psz}, std::move(out));
    if (should_record({&z})) {
        mark_as_output(y);
        Tape::current()->record("patchify", y, [zi = z.handle(), yi = y.handle(),
                                                map, n, psz]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gz = grad_dst(zi.get());
            if (!gz) return;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t e = 0; e < psz; ++e) {
                    (*gz)[map.voxel_index(i, e)] += (*g)[i * psz + e];
                }
            }
        });
    }
    return y;
}

Tensor unpatchify(const Tensor& patches, std::array<std::size_t, 3> patch,
                  std::array<std::size_t, 3> dims) {
    require_rank(patches, 2, "unpatchify");
    const std::size_t n = patch_count(dims, patch);
    const std::size_t psz = patch[0] * patch[1] * patch[2];
    if (patches.shape()[0] != n || patches.shape()[1] != psz) {
        throw ShapeError("unpatchify: patches " + shape_str(patches.shape()) +
                         " inconsistent with dims/patch");
    }
    const PatchMap map = make_patch_map(dims, patch);
    std::vector<double> out(dims[0] * dims[1] * dims[2]);
    const auto& p = patches.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t e = 0; e < psz; ++e) {
            out[map.voxel_index(i, e)] = p[i * psz + e];
        }
    }
    Tensor y = Tensor::from_data({1, dims[0], dims[1], dims[2]}, std::move(out));
    if (should_record({&patches})) {
        mark_as_output(y);
        Tape::current()->record("unpatchify", y,
                                [pi = patches.handle(), yi = y.handle(), map, n,
                                 psz]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gp = grad_dst(pi.get());
            if (!gp) return;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t e = 0; e < psz; ++e) {
                    (*gp)[i * psz + e] += (*g)[map.voxel_index(i, e)];
                }
            }
        });
    }
    return y;
}

Tensor concat_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ShapeError("concat_rows: empty input");
    const std::size_t m = rows[0].rank() == 2 ? rows[0].shape()[1] : 0;
    for (const Tensor& r : rows) {
        if (r.rank() != 2 || r.shape()[0] != 1 || r.shape()[1] != m) {
            throw ShapeError("concat_rows: every row must be (1," +
                             std::to_string(m) + "), got " + shape_str(r.shape()));
        }
    }
    const std::size_t n = rows.size();
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rd = rows[i].data();
        std::copy(rd.begin(), rd.end(), out.begin() + i * m);
    }
    Tensor y = Tensor::from_data({n, m}, std::move(out));
    bool wants = false;
    for (const Tensor& r : rows) wants = wants || r.requires_grad();
    if (Tape::current() != nullptr && wants) {
        mark_as_output(y);
        std::vector<Handle> handles;
        handles.reserve(n);
        for (const Tensor& r : rows) handles.push_back(r.handle());
        Tape::current()->record("concat_rows", y, [handles = std::move(handles),
                                                   yi = y.handle(), m]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            for (std::size_t i = 0; i < handles.size(); ++i) {
                if (auto* gr = grad_dst(handles[i].get())) {
                    for (std::size_t j = 0; j < m; ++j) (*gr)[j] += (*g)[i * m + j];
                }
            }
        });
    }
    return y;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "concat_cols");
    require_rank(b, 2, "concat_cols");
    if (a.shape()[0] != b.shape()[0]) {
        throw ShapeError("concat_cols: row counts disagree, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const std::size_t n = a.shape()[0];
    const std::size_t wa = a.shape()[1];
    const std::size_t wb = b.shape()[1];
    std::vector<double> out(n * (wa + wb));
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(ad.begin() + i * wa, ad.begin() + (i + 1) * wa,
                  out.begin() + i * (wa + wb));
        std::copy(bd.begin() + i * wb, bd.begin() + (i + 1) * wb,
                  out.begin() + i * (wa + wb) + wa);
    }
    Tensor y = Tensor::from_data({n, wa + wb}, std::move(out));
    if (should_record({&a, &b})) {
        mark_as_output(y);
        Tape::current()->record("concat_cols", y, [ai = a.handle(), bi = b.handle(),
                                                   yi = y.handle(), n, wa, wb]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            if (auto* ga = grad_dst(ai.get())) {
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < wa; ++j) {
                        (*ga)[i * wa + j] += (*g)[i * (wa + wb) + j];
                    }
                }
            }
            if (auto* gb = grad_dst(bi.get())) {
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < wb; ++j) {
                        (*gb)[i * wb + j] += (*g)[i * (wa + wb) + wa + j];
                    }
                }
            }
        });
    }
    return y;
}

Tensor take_diag(const Tensor& x) {
    require_rank(x, 2, "take_diag");
    if (x.shape()[0] != x.shape()[1]) {
        throw ShapeError("take_diag: matrix must be square, got " +
                         shape_str(x.shape()));
    }
    const std::size_t n = x.shape()[0];
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = x.data()[i * n + i];
    Tensor y = Tensor::from_data({n}, std::move(out));
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("take_diag", y, [xi = x.handle(), yi = y.handle(),
                                                 n]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (std::size_t i = 0; i < n; ++i) (*gx)[i * n + i] += (*g)[i];
        });
    }
    return y;
}

Tensor pick_cols(const Tensor& x, const std::vector<std::size_t>& cols) {
    require_rank(x, 2, "pick_cols");
    const std::size_t n = x.shape()[0];
    const std::size_t c = x.shape()[1];
    if (cols.size() != n) {
        throw ShapeError("pick_cols: need one column index per row");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (cols[i] >= c) {
            throw ShapeError("pick_cols: index " + std::to_string(cols[i]) +
                             " out of range for " + std::to_string(c) + " columns");
        }
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = x.data()[i * c + cols[i]];
    Tensor y = Tensor::from_data({n}, std::move(out));
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("pick_cols", y, [xi = x.handle(), yi = y.handle(),
                                                 cols, c]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (std::size_t i = 0; i < cols.size(); ++i) {
                (*gx)[i * c + cols[i]] += (*g)[i];
            }
        });
    }
    return y;
}

Tensor embed_rows(const Tensor& table, const std::vector<std::size_t>& ids) {
    require_rank(table, 2, "embed_rows");
    if (ids.empty()) throw ShapeError("embed_rows: empty id list");
    const std::size_t v = table.shape()[0];
    const std::size_t t = table.shape()[1];
    for (std::size_t id : ids) {
        if (id >= v) {
            throw ShapeError("embed_rows: id " + std::to_string(id) +
                             " out of range for table of " + std::to_string(v) +
                             " rows");
        }
    }
    std::vector<double> out(ids.size() * t);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double* row = table.data().data() + ids[i] * t;
        std::copy(row, row + t, out.begin() + i * t);
    }
    Tensor y = Tensor::from_data({ids.size(), t}, std::move(out));
    if (should_record({&table})) {
        mark_as_output(y);
        Tape::current()->record("embed_rows", y, [ti = table.handle(),
                                                  yi = y.handle(), ids, t]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gt = grad_dst(ti.get());
            if (!gt) return;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                for (std::size_t j = 0; j < t; ++j) {
                    (*gt)[ids[i] * t + j] += (*g)[i * t + j];
                }
            }
        });
    }
    return y;
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor y = Tensor::scalar(acc);
    check_output("sum_all", y);
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("sum_all", y, [xi = x.handle(), yi = y.handle()]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (double& gv : *gx) gv += (*g)[0];
        });
    }
    return y;
}

Tensor mean_all(const Tensor& x) {
    if (x.numel() == 0) throw ShapeError("mean_all: empty tensor");
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.numel());
    Tensor y = Tensor::scalar(acc * inv);
    check_output("mean_all", y);
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("mean_all", y, [xi = x.handle(), yi = y.handle(),
                                                inv]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (double& gv : *gx) gv += (*g)[0] * inv;
        });
    }
    return y;
}

Tensor mean_over_rows(const Tensor& x) {
    require_rank(x, 2, "mean_over_rows");
    const std::size_t n = x.shape()[0];
    const std::size_t m = x.shape()[1];
    if (n == 0) throw ShapeError("mean_over_rows: zero rows");
    std::vector<double> out(m, 0.0);
    const auto& xd = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[j] += xd[i * m + j];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= inv;
    Tensor y = Tensor::from_data({1, m}, std::move(out));
    check_output("mean_over_rows", y);
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("mean_over_rows", y, [xi = x.handle(),
                                                      yi = y.handle(), n, m,
                                                      inv]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) (*gx)[i * m + j] += (*g)[j] * inv;
            }
        });
    }
    return y;
}

Tensor l2_normalize_rows(const Tensor& x) {
    require_rank(x, 2, "l2_normalize_rows");
    const std::size_t n = x.shape()[0];
    const std::size_t m = x.shape()[1];
    std::vector<double> out(n * m);
    std::vector<double> norms(n);
    const auto& xd = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < m; ++j) sq += xd[i * m + j] * xd[i * m + j];
        const double norm = std::sqrt(sq);
        if (norm == 0.0) {
            throw NumericError("l2_normalize_rows: row " + std::to_string(i) +
                               " has zero norm");
        }
        norms[i] = norm;
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = xd[i * m + j] / norm;
    }
    Tensor y = Tensor::from_data(x.shape(), std::move(out));
    check_output("l2_normalize_rows", y);
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("l2_normalize_rows", y,
                                [xi = x.handle(), yi = y.handle(),
                                 norms = std::move(norms), n, m]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (std::size_t i = 0; i < n; ++i) {
                double gy = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    gy += (*g)[i * m + j] * yi->data[i * m + j];
                }
                for (std::size_t j = 0; j < m; ++j) {
                    (*gx)[i * m + j] +=
                        ((*g)[i * m + j] - yi->data[i * m + j] * gy) / norms[i];
                }
            }
        });
    }
    return y;
}

Tensor softmax_rows(const Tensor& x) {
    require_rank(x, 2, "softmax_rows");
    const std::size_t n = x.shape()[0];
    const std::size_t m = x.shape()[1];
    if (m == 0) throw ShapeError("softmax_rows: zero columns");
    std::vector<double> out(n * m);
    const auto& xd = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        double mx = xd[i * m];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, xd[i * m + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double e = std::exp(xd[i * m + j] - mx);
            out[i * m + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= denom;
    }
    Tensor y = Tensor::from_data(x.shape(), std::move(out));
    check_output("softmax_rows", y);
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("softmax_rows", y, [xi = x.handle(),
                                                    yi = y.handle(), n, m]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    dot += (*g)[i * m + j] * yi->data[i * m + j];
                }
                for (std::size_t j = 0; j < m; ++j) {
                    (*gx)[i * m + j] +=
                        ((*g)[i * m + j] - dot) * yi->data[i * m + j];
                }
            }
        });
    }
    return y;
}

Tensor log_softmax_rows(const Tensor& x) {
    require_rank(x, 2, "log_softmax_rows");
    const std::size_t n = x.shape()[0];
    const std::size_t m = x.shape()[1];
    if (m == 0) throw ShapeError("log_softmax_rows: zero columns");
    std::vector<double> out(n * m);
    const auto& xd = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        double mx = xd[i * m];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, xd[i * m + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) denom += std::exp(xd[i * m + j] - mx);
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = xd[i * m + j] - lse;
    }
    Tensor y = Tensor::from_data(x.shape(), std::move(out));
    check_output("log_softmax_rows", y);
    if (should_record({&x})) {
        mark_as_output(y);
        Tape::current()->record("log_softmax_rows", y, [xi = x.handle(),
                                                        yi = y.handle(), n, m]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            auto* gx = grad_dst(xi.get());
            if (!gx) return;
            for (std::size_t i = 0; i < n; ++i) {
                double gsum = 0.0;
                for (std::size_t j = 0; j < m; ++j) gsum += (*g)[i * m + j];
                for (std::size_t j = 0; j < m; ++j) {
                    (*gx)[i * m + j] +=
                        (*g)[i * m + j] - std::exp(yi->data[i * m + j]) * gsum;
                }
            }
        });
    }
    return y;
}

Tensor div_by_scalar(const Tensor& x, const Tensor& s) {
    if (s.numel() != 1) {
        throw ShapeError("div_by_scalar: divisor must be scalar, got " +
                         shape_str(s.shape()));
    }
    const double sv = s.data()[0];
    if (sv == 0.0) throw NumericError("div_by_scalar: division by zero");
    std::vector<double> out(x.numel());
    const auto& xd = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] / sv;
    Tensor y = Tensor::from_data(x.shape(), std::move(out));
    check_output("div_by_scalar", y);
    if (should_record({&x, &s})) {
        mark_as_output(y);
        Tape::current()->record("div_by_scalar", y, [xi = x.handle(),
                                                     si = s.handle(),
                                                     yi = y.handle(), sv]() {
            const auto* g = out_grad(yi.get());
            if (!g) return;
            if (auto* gx = grad_dst(xi.get())) {
                for (std::size_t i = 0; i < g->size(); ++i) {
                    (*gx)[i] += (*g)[i] / sv;
                }
            }
            if (auto* gs = grad_dst(si.get())) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g->size(); ++i) {
                    acc += (*g)[i] * yi->data[i];
                }
                (*gs)[0] -= acc / sv;
            }
        });
    }
    return y;
}

}  // namespace voxalign::ops
