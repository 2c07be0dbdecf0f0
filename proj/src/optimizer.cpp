#include "voxalign/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "voxalign/common.hpp"

namespace voxalign {

void validate_optim_config(const AdamWConfig& c) {
    if (!(c.lr_adapter > 0.0) || !(c.lr_projection > 0.0)) {
        throw ConfigError("optimizer: learning rates must be positive");
    }
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) ||
        !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
        throw ConfigError("optimizer: betas must lie in [0, 1)");
    }
    if (!(c.eps > 0.0)) throw ConfigError("optimizer: eps must be positive");
    if (c.weight_decay < 0.0) {
        throw ConfigError("optimizer: weight_decay must be non-negative");
    }
}

AdamW::AdamW(ParameterStore& store, const AdamWConfig& config)
    : store_(store), config_(config) {
    validate_optim_config(config_);
    moments_.resize(store_.size());
    const auto& params = store_.all();
    for (std::size_t i = 0; i < params.size(); ++i) {
        moments_[i].m.assign(params[i].tensor.numel(), 0.0);
        moments_[i].v.assign(params[i].tensor.numel(), 0.0);
    }
}

double AdamW::lr_for(std::string_view name) const {
    return name.rfind("adapter.", 0) == 0 ? config_.lr_adapter
                                          : config_.lr_projection;
}

void AdamW::step() {
    if (store_.size() != moments_.size()) {
        throw std::logic_error("adamw: parameter store changed size");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, double(t_));

    auto& params = store_.all();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        if (!p.trainable) continue;
        if (!p.tensor.has_grad()) {
            throw std::logic_error("adamw: trainable parameter '" + p.name +
                                   "' has no gradient; run backward first");
        }
        const std::vector<double>& g = p.tensor.grad();
        std::vector<double>& w = p.tensor.data();
        Moments& mo = moments_[i];
        const double lr = lr_for(p.name);
        const double decay = 1.0 - lr * config_.weight_decay;
        for (std::size_t j = 0; j < w.size(); ++j) {
            mo.m[j] = config_.beta1 * mo.m[j] + (1.0 - config_.beta1) * g[j];
            mo.v[j] = config_.beta2 * mo.v[j] +
                      (1.0 - config_.beta2) * g[j] * g[j];
            const double mhat = mo.m[j] / bc1;
            const double vhat = mo.v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
            w[j] *= decay;
            if (!std::isfinite(w[j])) {
                throw NumericError("adamw: parameter '" + p.name +
                                   "' became non-finite at step " +
                                   std::to_string(t_));
            }
        }
    }
}

}  // namespace voxalign
