#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "voxalign/params.hpp"

namespace voxalign {

struct AdamWConfig {
    double lr_adapter = 1e-3;
    double lr_projection = 1e-4;  // every non-adapter trainable group
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

void validate_optim_config(const AdamWConfig& config);  // ConfigError

// Decoupled weight decay: the Adam update and the decay multiply are two
// separate writes, so a parameter with an exactly-zero gradient shrinks by
// the exact factor (1 - lr * weight_decay) per step. Learning rate is
// per-group by name: "adapter.*" uses lr_adapter, everything else trainable
// uses lr_projection. Frozen parameters are never touched, even if a stale
// gradient buffer is present.
class AdamW {
public:
    AdamW(ParameterStore& store, const AdamWConfig& config);

    // One update from the currently accumulated gradients. A trainable
    // parameter without a gradient buffer means backward never ran.
    void step();

    std::size_t step_count() const { return t_; }
    double lr_for(std::string_view name) const;
    const AdamWConfig& config() const { return config_; }

private:
    ParameterStore& store_;
    AdamWConfig config_;
    struct Moments {
        std::vector<double> m, v;
    };
    std::vector<Moments> moments_;  // parallel to store order
    std::size_t t_ = 0;
};

}  // namespace voxalign
