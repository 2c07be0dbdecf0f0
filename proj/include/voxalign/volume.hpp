#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace voxalign {

enum class Label { AD = 0, CN = 1, MCI = 2 };
inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels{Label::AD, Label::CN,
                                                           Label::MCI};

const char* label_name(Label label);
Label label_from_name(std::string_view name);  // DataError on unknown name

// Dense 3D scalar field, row-major (depth, height, width).
struct VolumeGrid {
    std::array<std::size_t, 3> dims{};
    std::vector<double> voxels;

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    double at(std::size_t d, std::size_t h, std::size_t w) const {
        return voxels[(d * dims[1] + h) * dims[2] + w];
    }
    double& at(std::size_t d, std::size_t h, std::size_t w) {
        return voxels[(d * dims[1] + h) * dims[2] + w];
    }
};

// Corner-aligned trilinear interpolation: target sample i maps to source
// coordinate i*(n_src-1)/(n_tgt-1). Exact on constant and axis-aligned
// linear fields. Extents must be >= 2 per axis on both grids.
VolumeGrid resample_trilinear(const VolumeGrid& grid,
                              std::array<std::size_t, 3> target_dims);

// Min-max rescale to [0,1]; a constant grid maps to all zeros.
VolumeGrid normalize_intensity(const VolumeGrid& grid);

struct VolumeSample {
    VolumeGrid grid;
    std::string subject_id;
    Label label = Label::AD;
    std::string processing_tag;
};

// Binary volume container, stored at 32-bit float precision:
//   8-byte magic "VOLGRID1",
//   four little-endian u32: version=1, depth, height, width,
//   depth*height*width little-endian f32 voxels,
//   little-endian u32 checksum = sum of voxel payload bytes mod 2^32.
// Metadata lives in a key=value sidecar with extension ".meta".
void store_volume(const VolumeSample& sample, const std::filesystem::path& path);
VolumeSample load_volume(const std::filesystem::path& path);

// Round through storage precision; generated cohorts are snapped with this
// so store/load round-trips are bit-identical.
double to_storage_precision(double v);

}  // namespace voxalign
