#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "voxalign/model.hpp"
#include "voxalign/trainer.hpp"
#include "voxalign/volume.hpp"

namespace voxalign {

struct EmbeddingTable {
    std::vector<std::string> ids;
    std::vector<Label> labels;
    std::size_t dim = 0;               // fused width = 2 * proj_dim
    std::vector<double> rows;          // row-major, ids.size() x dim
    std::vector<std::array<double, 2>> pca;  // per-row projection
    double separation = 0.0;
};

// Fused [volume ; text] embedding per example, a deterministic 2-component
// PCA fitted on this very table, and the class-separation score.
EmbeddingTable export_embeddings(const AlignmentModel& model,
                                 const std::vector<TrainingExample>& examples);

// Mean pairwise distance between class centroids divided by the mean
// distance of a sample to its own class centroid. Degenerate spreads
// (all samples on their centroid) score +infinity. Needs >= 2 classes.
double separation_score(const std::vector<Label>& labels,
                        const std::vector<double>& rows, std::size_t dim);

void store_embeddings_csv(const EmbeddingTable& table,
                          const std::filesystem::path& path);

}  // namespace voxalign
