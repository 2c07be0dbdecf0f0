#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "voxalign/tensor.hpp"

namespace voxalign {

struct Parameter {
    std::string name;
    Tensor tensor;
    bool trainable = false;
};

// Insertion-ordered registry; iteration order is construction order, which
// fixes optimizer and checkpoint ordering for determinism.
class ParameterStore {
public:
    // The tensor's requires_grad flag is forced to `trainable`.
    Tensor add(std::string name, Tensor tensor, bool trainable);

    bool has(std::string_view name) const;
    Parameter& at(std::string_view name);
    const Parameter& at(std::string_view name) const;

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    std::size_t size() const { return params_.size(); }

    std::size_t total_elements() const;
    std::size_t trainable_elements() const;
    std::vector<std::string> trainable_names() const;

    void zero_grads();

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class FreezeMode { FPM, TLP };

const char* freeze_mode_name(FreezeMode mode);
FreezeMode freeze_mode_from_name(std::string_view name);  // ConfigError

// A projection is any "vision.*"/"text.*" parameter whose name ends ".proj".
bool is_projection_param(std::string_view name);

// True when `name` is trainable under `mode`: the adapter, head, temperature
// and loss-weight scalars always train; projections additionally train in
// TLP; everything else stays frozen.
bool trainable_under(FreezeMode mode, std::string_view name);

// Sets every parameter's trainable flag (and requires_grad) per the mode;
// freezing drops any existing gradient buffer.
void apply_freeze_mode(ParameterStore& store, FreezeMode mode);

}  // namespace voxalign
