#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "voxalign/adapter.hpp"
#include "voxalign/alignment.hpp"
#include "voxalign/encoders.hpp"
#include "voxalign/params.hpp"

namespace voxalign {

struct ModelConfig {
    AdapterConfig adapter;
    PatchSpec patch;
    VisionEncoderConfig vision;
    TextEncoderConfig text;
    std::size_t head_hidden = 32;
    double temperature_init = 0.07;
    double lambda_init = 1.0;
    bool learn_loss_weights = true;
    std::uint64_t seed = 1;
    FreezeMode mode = FreezeMode::TLP;
};

// The full two-tower model. Parameter registration order is fixed, so
// optimizer traversal and checkpoints are deterministic. All weights live
// in the ParameterStore; the towers hold aliasing handles.
class AlignmentModel {
public:
    explicit AlignmentModel(const ModelConfig& config);

    // volume: 1 x D x H x W -> unit-norm 1 x proj_dim
    Tensor encode_volume(const Tensor& volume) const;
    // token ids -> unit-norm 1 x proj_dim
    Tensor encode_tokens(const std::vector<std::size_t>& token_ids) const;
    // U, V: N x proj_dim -> logits N x 3
    Tensor head_logits(const Tensor& u, const Tensor& v) const;

    void set_mode(FreezeMode mode);

    const ModelConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }
    const Adapter& adapter() const { return *adapter_; }
    const Temperature& temperature() const { return temperature_; }
    const LossWeights& loss_weights() const { return loss_weights_; }

    std::size_t adapter_elements() const;

private:
    ModelConfig config_;
    ParameterStore params_;
    std::unique_ptr<Adapter> adapter_;
    std::unique_ptr<VisionEncoder> vision_;
    std::unique_ptr<TextEncoder> text_;
    Tensor head_w1_, head_b1_, head_w2_, head_b2_;
    Temperature temperature_;
    LossWeights loss_weights_;
};

}  // namespace voxalign
