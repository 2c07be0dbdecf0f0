#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "voxalign/params.hpp"
#include "voxalign/rng.hpp"
#include "voxalign/tensor.hpp"

namespace voxalign {

struct AdapterConfig {
    std::array<std::size_t, 3> input_dims{32, 32, 32};  // D, H, W
    std::size_t depth_reduction = 8;  // power of two; output depth = D / r
    std::vector<std::size_t> stage_channels{8, 8, 1};  // one entry per stage
    std::array<std::size_t, 3> kernel{3, 3, 3};        // odd extents
    bool residual_block = true;

    std::array<std::size_t, 3> output_dims() const {
        return {input_dims[0] / depth_reduction, input_dims[1], input_dims[2]};
    }
};

// ConfigError when the invariants don't hold: r a power of two dividing D,
// one stage per halving, single-channel output, odd kernel extents.
void validate_adapter_config(const AdapterConfig& config);

// Exact trainable element count from config arithmetic alone.
std::size_t count_trainable_params(const AdapterConfig& config);

// Depth-reducing convolutional bottleneck: log2(r) stages of conv
// (stride (2,1,1), same padding) + bias + ReLU, then a residual block
// out = in + conv2(ReLU(conv1(in))) whose second conv starts zero so the
// block begins as an exact identity. All weights are registered under
// "adapter." and train in every freeze mode.
class Adapter {
public:
    Adapter(const AdapterConfig& config, ParameterStore& store, Rng& init_rng);

    // x: 1 x D x H x W -> 1 x D/r x H x W
    Tensor forward(const Tensor& x) const;

    const AdapterConfig& config() const { return config_; }

private:
    AdapterConfig config_;
    struct Stage {
        Tensor kernel, bias;
    };
    std::vector<Stage> stages_;
    Stage res1_, res2_;
};

}  // namespace voxalign
