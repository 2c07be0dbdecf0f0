#include "voxalign/params.hpp"

#include "voxalign/common.hpp"

namespace voxalign {

Tensor ParameterStore::add(std::string name, Tensor tensor, bool trainable) {
    if (!tensor.defined()) {
        throw ShapeError("parameter '" + name + "' has no tensor");
    }
    if (index_.count(name)) {
        throw ConfigError("duplicate parameter name '" + name + "'");
    }
    tensor.impl()->requires_grad = trainable;
    tensor.impl()->is_leaf = true;
    index_.emplace(name, params_.size());
    params_.push_back({std::move(name), tensor, trainable});
    return tensor;
}

bool ParameterStore::has(std::string_view name) const {
    return index_.count(std::string(name)) > 0;
}

Parameter& ParameterStore::at(std::string_view name) {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) {
        throw ConfigError("unknown parameter '" + std::string(name) + "'");
    }
    return params_[it->second];
}

const Parameter& ParameterStore::at(std::string_view name) const {
    return const_cast<ParameterStore*>(this)->at(name);
}

std::size_t ParameterStore::total_elements() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) n += p.tensor.numel();
    return n;
}

std::size_t ParameterStore::trainable_elements() const {
    std::size_t n = 0;
    for (const Parameter& p : params_) {
        if (p.trainable) n += p.tensor.numel();
    }
    return n;
}

std::vector<std::string> ParameterStore::trainable_names() const {
    std::vector<std::string> names;
    for (const Parameter& p : params_) {
        if (p.trainable) names.push_back(p.name);
    }
    return names;
}

void ParameterStore::zero_grads() {
    for (Parameter& p : params_) p.tensor.zero_grad();
}

const char* freeze_mode_name(FreezeMode mode) {
    return mode == FreezeMode::FPM ? "fpm" : "tlp";
}

FreezeMode freeze_mode_from_name(std::string_view name) {
    if (name == "fpm" || name == "FPM") return FreezeMode::FPM;
    if (name == "tlp" || name == "TLP") return FreezeMode::TLP;
    throw ConfigError("unknown freeze mode '" + std::string(name) +
                      "' (expected fpm or tlp)");
}

bool is_projection_param(std::string_view name) {
    const bool encoder = name.rfind("vision.", 0) == 0 ||
                         name.rfind("text.", 0) == 0;
    return encoder && name.size() >= 5 &&
           name.substr(name.size() - 5) == ".proj";
}

bool trainable_under(FreezeMode mode, std::string_view name) {
    if (name.rfind("adapter.", 0) == 0) return true;
    if (name.rfind("head.", 0) == 0) return true;
    if (name.rfind("temperature.", 0) == 0) return true;
    if (name.rfind("loss.", 0) == 0) return true;
    if (mode == FreezeMode::TLP && is_projection_param(name)) return true;
    return false;
}

void apply_freeze_mode(ParameterStore& store, FreezeMode mode) {
    for (Parameter& p : store.all()) {
        p.trainable = trainable_under(mode, p.name);
        p.tensor.impl()->requires_grad = p.trainable;
        if (!p.trainable) p.tensor.impl()->grad.clear();
    }
}

}  // namespace voxalign
