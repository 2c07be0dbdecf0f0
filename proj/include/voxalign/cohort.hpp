#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxalign/report.hpp"
#include "voxalign/volume.hpp"

namespace voxalign {

struct CohortConfig {
    std::array<std::size_t, 3> dims{32, 32, 32};
    std::array<std::size_t, 3> counts{47, 50, 71};  // AD, CN, MCI
    std::uint64_t seed = 1;
};

struct LabeledSample {
    VolumeSample volume;
    ReportRecord record;
};

// Deterministic synthetic cohort. Each sample is built on a slightly larger
// generation grid, smoothed according to its processing tag, resampled to
// config dims, normalized to [0,1], and snapped to storage precision. The
// class signal is a centered "signal region" ellipsoid whose radius shrinks
// CN -> MCI -> AD, paired with a report whose assessment fields come from
// class-conditional ranges.
std::vector<LabeledSample> synthesize_cohort(const CohortConfig& config);

enum class Split { train, test };
const char* split_name(Split split);
Split split_from_name(std::string_view name);

struct ManifestEntry {
    std::string path;  // volume file, relative to the manifest directory
    Label label = Label::AD;
    Split split = Split::train;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    double train_fraction = 0.0;
    std::array<std::size_t, kNumClasses> class_counts{};  // AD, CN, MCI
    std::vector<ManifestEntry> entries;
};

// Stratified shuffle-then-cut: per class, round(fraction * class size)
// samples become train, the rest test. Deterministic under seed.
DatasetManifest split_dataset(const DatasetManifest& manifest,
                              double train_fraction, std::uint64_t seed);

void store_manifest(const DatasetManifest& manifest,
                    const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace voxalign
