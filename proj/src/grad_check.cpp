#include "voxalign/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "voxalign/common.hpp"

namespace voxalign {

GradCheckResult grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& loss_fn,
    std::vector<Tensor>& inputs, double h) {
    // analytic pass
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        for (Tensor& t : inputs) t.zero_grad();
        Tensor loss = loss_fn(inputs);
        tape.backward(loss);
        for (Tensor& t : inputs) {
            if (!t.requires_grad()) {
                analytic.emplace_back(t.numel(), 0.0);
            } else {
                analytic.push_back(t.grad());
            }
        }
    }

    GradCheckResult result;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        if (!inputs[ti].requires_grad()) continue;
        auto& vals = inputs[ti].data();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + h;
            const double fp = loss_fn(inputs).value();
            vals[i] = orig - h;
            const double fm = loss_fn(inputs).value();
            vals[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[ti][i];
            const double rel =
                std::abs(a - numeric) /
                std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_tensor = ti;
                result.worst_index = i;
            }
        }
    }
    return result;
}

}  // namespace voxalign
