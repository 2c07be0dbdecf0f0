#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "voxalign/tensor.hpp"

namespace voxalign::ops {

// Every primitive checks its freshly computed output for NaN and throws
// NumericError on the first hit; silent NaN propagation is never allowed.

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor relu(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);  // requires strictly positive input
Tensor softplus(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// ---- broadcast adds ----
// X (N,M) + row bias (M)
Tensor add_rowvec(const Tensor& x, const Tensor& bias);
// x (C,D,H,W) + per-channel bias (C)
Tensor bias_add_channels(const Tensor& x, const Tensor& bias);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // (N,K)x(K,M) -> (N,M)
Tensor transpose(const Tensor& x);                // (N,M) -> (M,N)

// ---- convolution ----
// input (C_in,D,H,W), kernel (C_out,C_in,kD,kH,kW); cross-correlation with
// zero padding. Output spatial extent per axis: (in + 2*pad - k)/stride + 1.
Tensor conv3d(const Tensor& input, const Tensor& kernel,
              std::array<std::size_t, 3> stride, std::array<std::size_t, 3> pad);
// Shape-only version of the above; validates and throws like the real op.
Shape conv3d_output_shape(const Shape& input, const Shape& kernel,
                          std::array<std::size_t, 3> stride,
                          std::array<std::size_t, 3> pad);

// ---- structural ----
// z (1,D,H,W) -> (N, pD*pH*pW), patches enumerated row-major over the patch
// grid, each row a row-major flattened patch.
Tensor patchify(const Tensor& z, std::array<std::size_t, 3> patch);
Tensor unpatchify(const Tensor& patches, std::array<std::size_t, 3> patch,
                  std::array<std::size_t, 3> dims);
std::size_t patch_count(const std::array<std::size_t, 3>& dims,
                        const std::array<std::size_t, 3>& patch);

Tensor concat_rows(const std::vector<Tensor>& rows);      // k x (1,M) -> (k,M)
Tensor concat_cols(const Tensor& a, const Tensor& b);     // (N,A)+(N,B) -> (N,A+B)
Tensor take_diag(const Tensor& x);                        // (N,N) -> (N)
Tensor pick_cols(const Tensor& x, const std::vector<std::size_t>& cols);  // (N,C) -> (N)
Tensor embed_rows(const Tensor& table, const std::vector<std::size_t>& ids);

// ---- reductions / row maps ----
Tensor sum_all(const Tensor& x);        // -> (1)
Tensor mean_all(const Tensor& x);       // -> (1)
Tensor mean_over_rows(const Tensor& x);  // (N,M) -> (1,M)
Tensor l2_normalize_rows(const Tensor& x);  // zero rows rejected
Tensor softmax_rows(const Tensor& x);       // row-max stabilized
Tensor log_softmax_rows(const Tensor& x);

// ---- scalar coupling ----
// y = x / s with s a scalar tensor; differentiable in both.
Tensor div_by_scalar(const Tensor& x, const Tensor& s);

// Test hook: when enabled, the relu backward rule is scaled by 1.01 so the
// gradient-check suite has a negative control to catch.
void set_gradient_fault_injection(bool enabled);
bool gradient_fault_injection();

}  // namespace voxalign::ops
