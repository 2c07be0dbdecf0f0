#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "voxalign/cohort.hpp"
#include "voxalign/model.hpp"
#include "voxalign/trainer.hpp"

namespace voxalign {

// Everything a run needs, resolvable from a key=value file plus CLI
// overrides. Field defaults are the desk-scale reference configuration.
struct RunConfig {
    std::uint64_t seed = 1;
    FreezeMode mode = FreezeMode::TLP;

    CohortConfig cohort;          // data.* keys
    double train_fraction = 0.7;  // data.train_fraction
    std::size_t max_tokens = 64;  // data.max_tokens

    ModelConfig model;  // adapter.*, patch.*, vision.*, text.*, head.*, loss.*
    TrainConfig train;  // train.*, optim.*
};

// Lines of "key = value"; '#' starts a comment; blank lines are skipped.
// Unknown keys and malformed values are ConfigErrors. The result has every
// cross-field dependency resolved (seeds, dims, freeze mode).
RunConfig load_run_config(const std::filesystem::path& path);

// Applies one key=value assignment; load_run_config is a fold over this.
void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value);

// Re-derives the dependent fields (adapter dims from data dims, encoder and
// train seeds from the master seed, model mode). Call after mutating fields
// directly, e.g. for CLI --seed/--mode overrides.
void resolve_run_config(RunConfig& config);

// Full echo of the resolved configuration, one key=value per line, stable
// order — written next to every run's outputs.
std::string render_run_config(const RunConfig& config);

}  // namespace voxalign
