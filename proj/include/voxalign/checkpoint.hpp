#pragma once

#include <filesystem>

#include "voxalign/params.hpp"

namespace voxalign {

// One .bin per parameter (little-endian u32 rank, u32 extents, f64 values)
// plus a manifest listing name, shape, trainable flag and payload checksum.
// Loading requires an exactly matching parameter census and verifies every
// checksum; any disagreement is a DataError.
void store_checkpoint(const ParameterStore& store,
                      const std::filesystem::path& dir);
void load_checkpoint(ParameterStore& store, const std::filesystem::path& dir);

}  // namespace voxalign
