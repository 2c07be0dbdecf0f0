#pragma once

#include <functional>
#include <string>
#include <vector>

#include "voxalign/tensor.hpp"

namespace voxalign {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t worst_tensor = 0;
    std::size_t worst_index = 0;
};

// Central-difference check of d(loss)/d(inputs). `loss_fn` must rebuild the
// graph from the current input values on every call and return a scalar.
// Relative error per coordinate: |a - n| / max(1, |a|, |n|).
GradCheckResult grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& loss_fn,
    std::vector<Tensor>& inputs, double h);

}  // namespace voxalign
