#include "voxalign/model.hpp"

#include <cmath>

#include "voxalign/common.hpp"
#include "voxalign/ops.hpp"

namespace voxalign {

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(v));
}

}  // namespace

AlignmentModel::AlignmentModel(const ModelConfig& config) : config_(config) {
    if (config_.vision.proj_dim != config_.text.proj_dim) {
        throw ConfigError("model: vision and text projection widths must "
                          "match (" +
                          std::to_string(config_.vision.proj_dim) + " vs " +
                          std::to_string(config_.text.proj_dim) + ")");
    }
    if (config_.head_hidden < 1) {
        throw ConfigError("model: head_hidden must be positive");
    }

    Rng adapter_rng(config_.seed, "init/adapter");
    adapter_ = std::make_unique<Adapter>(config_.adapter, params_, adapter_rng);

    Rng vproj_rng(config_.seed, "init/vision-proj");
    vision_ = std::make_unique<VisionEncoder>(config_.vision, config_.patch,
                                              config_.adapter.output_dims(),
                                              params_, vproj_rng);
    Rng tproj_rng(config_.seed, "init/text-proj");
    text_ = std::make_unique<TextEncoder>(config_.text, params_, tproj_rng);

    const std::size_t d2 = 2 * config_.vision.proj_dim;
    Rng head_rng(config_.seed, "init/head");
    head_w1_ = params_.add("head.w1",
                           uniform_init({d2, config_.head_hidden}, d2, head_rng),
                           true);
    head_b1_ = params_.add("head.b1", Tensor::zeros({config_.head_hidden}), true);
    // The output layer starts at zero: initial logits carry no random class
    // ordering, so the few head updates the schedule allows all go into
    // learned structure instead of undoing the init.
    head_w2_ =
        params_.add("head.w2", Tensor::zeros({config_.head_hidden, 3}), true);
    head_b2_ = params_.add("head.b2", Tensor::zeros({3}), true);

    temperature_ = Temperature::init(config_.temperature_init, true);
    params_.add("temperature.raw", temperature_.raw, true);
    loss_weights_ =
        LossWeights::init(config_.lambda_init, config_.lambda_init, true);
    params_.add("loss.lambda1.raw", loss_weights_.raw1, true);
    params_.add("loss.lambda2.raw", loss_weights_.raw2, true);

    set_mode(config_.mode);
}

void AlignmentModel::set_mode(FreezeMode mode) {
    config_.mode = mode;
    apply_freeze_mode(params_, mode);
    if (!config_.learn_loss_weights) {
        for (const char* name : {"loss.lambda1.raw", "loss.lambda2.raw"}) {
            Parameter& p = params_.at(name);
            p.trainable = false;
            p.tensor.impl()->requires_grad = false;
            p.tensor.impl()->grad.clear();
        }
    }
}

Tensor AlignmentModel::encode_volume(const Tensor& volume) const {
    return vision_->encode(adapter_->forward(volume));
}

Tensor AlignmentModel::encode_tokens(
    const std::vector<std::size_t>& token_ids) const {
    return text_->encode(token_ids);
}

Tensor AlignmentModel::head_logits(const Tensor& u, const Tensor& v) const {
    Tensor h = ops::relu(ops::add_rowvec(
        ops::matmul(ops::concat_cols(u, v), head_w1_), head_b1_));
    return ops::add_rowvec(ops::matmul(h, head_w2_), head_b2_);
}

std::size_t AlignmentModel::adapter_elements() const {
    std::size_t n = 0;
    for (const Parameter& p : params_.all()) {
        if (p.name.rfind("adapter.", 0) == 0) n += p.tensor.numel();
    }
    return n;
}

}  // namespace voxalign
