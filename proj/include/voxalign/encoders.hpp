#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "voxalign/params.hpp"
#include "voxalign/rng.hpp"
#include "voxalign/tensor.hpp"

namespace voxalign {

struct PatchSpec {
    std::array<std::size_t, 3> patch_dims{4, 16, 16};
};

struct VisionEncoderConfig {
    std::size_t token_dim = 32;
    std::size_t n_frozen_blocks = 2;
    std::size_t proj_dim = 16;
    std::uint64_t seed = 1;
};

struct TextEncoderConfig {
    std::size_t vocab_size = 256;
    std::size_t token_dim = 32;
    std::size_t n_frozen_blocks = 2;
    std::size_t proj_dim = 16;
    std::uint64_t seed = 1;
};

// Frozen patch-token stub standing in for a pretrained volumetric encoder:
// per-patch linear embedding, then residual token-mixing blocks, mean pool,
// and a trainable projection ("vision.proj"). Frozen weights are a pure
// function of (seed, architecture).
class VisionEncoder {
public:
    VisionEncoder(const VisionEncoderConfig& config, PatchSpec patch,
                  std::array<std::size_t, 3> input_dims, ParameterStore& store,
                  Rng& proj_rng);

    // z: 1 x D x H x W (adapter output) -> 1 x proj_dim, unit-norm rows
    Tensor encode(const Tensor& z) const;

    std::size_t token_count() const { return n_tokens_; }

private:
    VisionEncoderConfig config_;
    PatchSpec patch_;
    std::array<std::size_t, 3> input_dims_;
    std::size_t n_tokens_;
    Tensor embed_w_, embed_b_;
    std::vector<Tensor> mix_;
    Tensor proj_;
};

// Frozen embedding-table stub standing in for a pretrained text encoder:
// id lookup, mean pool over non-PAD positions, residual linear+ReLU blocks,
// and a trainable projection ("text.proj").
class TextEncoder {
public:
    TextEncoder(const TextEncoderConfig& config, ParameterStore& store,
                Rng& proj_rng);

    // DataError on an all-PAD sequence or an id >= vocab_size.
    Tensor encode(const std::vector<std::size_t>& token_ids) const;

private:
    TextEncoderConfig config_;
    Tensor embed_;
    std::vector<Tensor> blocks_;
    Tensor proj_;
};

}  // namespace voxalign
