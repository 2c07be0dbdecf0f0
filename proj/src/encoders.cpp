#include "voxalign/encoders.hpp"

#include <cmath>
#include <string>

#include "voxalign/common.hpp"
#include "voxalign/ops.hpp"
#include "voxalign/report.hpp"

namespace voxalign {

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(v));
}

}  // namespace

VisionEncoder::VisionEncoder(const VisionEncoderConfig& config, PatchSpec patch,
                             std::array<std::size_t, 3> input_dims,
                             ParameterStore& store, Rng& proj_rng)
    : config_(config), patch_(patch), input_dims_(input_dims) {
    if (config_.token_dim < 2 || config_.proj_dim < 2) {
        throw ConfigError("vision encoder: token_dim and proj_dim must be >= 2");
    }
    n_tokens_ = ops::patch_count(input_dims_, patch_.patch_dims);
    const std::size_t psz =
        patch_.patch_dims[0] * patch_.patch_dims[1] * patch_.patch_dims[2];

    Rng frozen(config_.seed, "frozen/vision");
    embed_w_ = store.add("vision.embed.weight",
                         uniform_init({psz, config_.token_dim}, psz, frozen),
                         false);
    embed_b_ = store.add("vision.embed.bias",
                         uniform_init({config_.token_dim}, psz, frozen), false);
    for (std::size_t i = 0; i < config_.n_frozen_blocks; ++i) {
        mix_.push_back(store.add(
            "vision.block" + std::to_string(i) + ".mix",
            uniform_init({n_tokens_, n_tokens_}, n_tokens_, frozen), false));
    }
    proj_ = store.add(
        "vision.proj",
        uniform_init({config_.token_dim, config_.proj_dim}, config_.token_dim,
                     proj_rng),
        false);
}

Tensor VisionEncoder::encode(const Tensor& z) const {
    const Shape want{1, input_dims_[0], input_dims_[1], input_dims_[2]};
    if (z.shape() != want) {
        throw ShapeError("vision encoder: expected " + shape_str(want) +
                         ", got " + shape_str(z.shape()));
    }
    Tensor tokens = ops::add_rowvec(
        ops::matmul(ops::patchify(z, patch_.patch_dims), embed_w_), embed_b_);
    for (const Tensor& m : mix_) {
        tokens = ops::add(tokens, ops::relu(ops::matmul(m, tokens)));
    }
    Tensor pooled = ops::mean_over_rows(tokens);
    return ops::l2_normalize_rows(ops::matmul(pooled, proj_));
}

TextEncoder::TextEncoder(const TextEncoderConfig& config, ParameterStore& store,
                         Rng& proj_rng)
    : config_(config) {
    if (config_.token_dim < 2 || config_.proj_dim < 2) {
        throw ConfigError("text encoder: token_dim and proj_dim must be >= 2");
    }
    if (config_.vocab_size < 3) {
        throw ConfigError("text encoder: vocab_size must cover the reserved "
                          "ids");
    }
    Rng frozen(config_.seed, "frozen/text");
    embed_ = store.add(
        "text.embed",
        uniform_init({config_.vocab_size, config_.token_dim},
                     config_.token_dim, frozen),
        false);
    for (std::size_t i = 0; i < config_.n_frozen_blocks; ++i) {
        blocks_.push_back(store.add(
            "text.block" + std::to_string(i) + ".w",
            uniform_init({config_.token_dim, config_.token_dim},
                         config_.token_dim, frozen),
            false));
    }
    proj_ = store.add(
        "text.proj",
        uniform_init({config_.token_dim, config_.proj_dim}, config_.token_dim,
                     proj_rng),
        false);
}

Tensor TextEncoder::encode(const std::vector<std::size_t>& token_ids) const {
    std::vector<std::size_t> live;
    live.reserve(token_ids.size());
    for (std::size_t id : token_ids) {
        if (id >= config_.vocab_size) {
            throw DataError("text encoder: token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(config_.vocab_size));
        }
        if (id != Vocabulary::kPad) live.push_back(id);
    }
    if (live.empty()) {
        throw DataError("text encoder: all-PAD token sequence has no content");
    }
    Tensor h = ops::mean_over_rows(ops::embed_rows(embed_, live));
    for (const Tensor& w : blocks_) {
        h = ops::add(h, ops::relu(ops::matmul(h, w)));
    }
    return ops::l2_normalize_rows(ops::matmul(h, proj_));
}

}  // namespace voxalign
