#include "voxalign/adapter.hpp"

#include <cmath>
#include <string>

#include "voxalign/common.hpp"
#include "voxalign/ops.hpp"

namespace voxalign {

namespace {

std::size_t log2_exact(std::size_t v) {
    std::size_t n = 0;
    while (v > 1) {
        if (v % 2 != 0) return static_cast<std::size_t>(-1);
        v /= 2;
        ++n;
    }
    return n;
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(v));
}

}  // namespace

void validate_adapter_config(const AdapterConfig& config) {
    const std::size_t stages = log2_exact(config.depth_reduction);
    if (config.depth_reduction == 0 || stages == static_cast<std::size_t>(-1)) {
        throw ConfigError("adapter: depth_reduction " +
                          std::to_string(config.depth_reduction) +
                          " is not a power of two");
    }
    if (config.input_dims[0] % config.depth_reduction != 0) {
        throw ConfigError("adapter: input depth " +
                          std::to_string(config.input_dims[0]) +
                          " is not divisible by depth_reduction " +
                          std::to_string(config.depth_reduction));
    }
    if (config.stage_channels.size() != stages) {
        throw ConfigError("adapter: need exactly one stage_channels entry per "
                          "depth halving (" +
                          std::to_string(stages) + "), got " +
                          std::to_string(config.stage_channels.size()));
    }
    for (std::size_t c : config.stage_channels) {
        if (c == 0) throw ConfigError("adapter: zero-width stage");
    }
    if (!config.stage_channels.empty() && config.stage_channels.back() != 1) {
        throw ConfigError("adapter: final stage must emit a single channel "
                          "for the patch encoder");
    }
    for (std::size_t k : config.kernel) {
        if (k % 2 == 0) {
            throw ConfigError("adapter: kernel extents must be odd for same "
                              "padding");
        }
    }
}

std::size_t count_trainable_params(const AdapterConfig& config) {
    validate_adapter_config(config);
    const std::size_t kvol = config.kernel[0] * config.kernel[1] * config.kernel[2];
    std::size_t total = 0;
    std::size_t c_in = 1;
    for (std::size_t c_out : config.stage_channels) {
        total += c_out * c_in * kvol + c_out;
        c_in = c_out;
    }
    if (config.residual_block) {
        total += 2 * (c_in * c_in * kvol + c_in);
    }
    return total;
}

Adapter::Adapter(const AdapterConfig& config, ParameterStore& store,
                 Rng& init_rng)
    : config_(config) {
    validate_adapter_config(config_);
    const auto [kd, kh, kw] = config_.kernel;
    const std::size_t kvol = kd * kh * kw;

    std::size_t c_in = 1;
    for (std::size_t i = 0; i < config_.stage_channels.size(); ++i) {
        const std::size_t c_out = config_.stage_channels[i];
        const std::string base = "adapter.stage" + std::to_string(i) + ".";
        Stage s;
        s.kernel = store.add(base + "kernel",
                             uniform_init({c_out, c_in, kd, kh, kw},
                                          c_in * kvol, init_rng),
                             true);
        s.bias = store.add(base + "bias", Tensor::zeros({c_out}), true);
        stages_.push_back(s);
        c_in = c_out;
    }

    if (config_.residual_block) {
        res1_.kernel = store.add(
            "adapter.res.conv1.kernel",
            uniform_init({c_in, c_in, kd, kh, kw}, c_in * kvol, init_rng), true);
        res1_.bias = store.add("adapter.res.conv1.bias", Tensor::zeros({c_in}),
                               true);
        // zero so the block starts as an identity
        res2_.kernel = store.add("adapter.res.conv2.kernel",
                                 Tensor::zeros({c_in, c_in, kd, kh, kw}), true);
        res2_.bias = store.add("adapter.res.conv2.bias", Tensor::zeros({c_in}),
                               true);
    }
}

Tensor Adapter::forward(const Tensor& x) const {
    const Shape want{1, config_.input_dims[0], config_.input_dims[1],
                     config_.input_dims[2]};
    if (x.shape() != want) {
        throw ShapeError("adapter: expected input " + shape_str(want) +
                         ", got " + shape_str(x.shape()));
    }
    const std::array<std::size_t, 3> pad{config_.kernel[0] / 2,
                                         config_.kernel[1] / 2,
                                         config_.kernel[2] / 2};
    Tensor h = x;
    for (const Stage& s : stages_) {
        h = ops::relu(ops::bias_add_channels(
            ops::conv3d(h, s.kernel, {2, 1, 1}, pad), s.bias));
    }
    if (config_.residual_block) {
        Tensor t = ops::relu(ops::bias_add_channels(
            ops::conv3d(h, res1_.kernel, {1, 1, 1}, pad), res1_.bias));
        t = ops::bias_add_channels(ops::conv3d(t, res2_.kernel, {1, 1, 1}, pad),
                                   res2_.bias);
        h = ops::add(h, t);
    }
    return h;
}

}  // namespace voxalign
