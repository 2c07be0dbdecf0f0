#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "voxalign/cohort.hpp"
#include "voxalign/metrics.hpp"
#include "voxalign/model.hpp"
#include "voxalign/optimizer.hpp"
#include "voxalign/report.hpp"
#include "voxalign/tensor.hpp"

namespace voxalign {

struct TrainingExample {
    std::string id;
    Label label = Label::AD;
    Tensor volume;                    // 1 x D x H x W
    std::vector<std::size_t> tokens;  // fixed-length padded ids
};

// Materializes one split of a stored dataset: the volume file per manifest
// entry plus its rendered report (same stem, ".txt"), tokenized against
// `vocab`. The manifest label must agree with the volume sidecar.
std::vector<TrainingExample> load_examples(
    const std::filesystem::path& manifest_dir, const DatasetManifest& manifest,
    Split split, const Vocabulary& vocab, std::size_t max_tokens);

struct BatchStats {
    std::size_t epoch = 0, batch = 0, size = 0;
    double contrastive = 0.0, ce = 0.0, joint = 0.0, accuracy = 0.0;
};

struct EpochStats {
    std::size_t epoch = 0;
    double contrastive = 0.0, ce = 0.0, joint = 0.0, accuracy = 0.0;
};

struct TrainHistory {
    std::vector<BatchStats> batches;
    std::vector<EpochStats> epochs;
};

void store_history(const TrainHistory& history,
                   const std::filesystem::path& path);

struct TrainConfig {
    std::size_t epochs = 9;
    std::size_t batch_size = 8;
    std::uint64_t seed = 1;
    AdamWConfig optim;
};

// Loss and accuracy over one batch at the current parameters, then one
// optimizer step. Exposed so tests can drive single steps.
BatchStats train_batch(AlignmentModel& model, AdamW& optim,
                       const std::vector<const TrainingExample*>& batch);

// Seeded shuffle -> fixed-size batches (a short final batch is kept), epoch
// over epoch. `on_epoch_end(epoch)` runs after each epoch's stats are in.
TrainHistory train_model(
    AlignmentModel& model, const std::vector<TrainingExample>& examples,
    const TrainConfig& config,
    const std::function<void(std::size_t)>& on_epoch_end = {});

struct EvalResult {
    std::vector<std::string> ids;
    std::vector<Label> truth;
    std::vector<Label> predicted;
    MetricsReport metrics;
};

EvalResult evaluate(const AlignmentModel& model,
                    const std::vector<TrainingExample>& examples);

}  // namespace voxalign
