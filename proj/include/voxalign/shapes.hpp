#pragma once

#include <string>

#include "voxalign/adapter.hpp"
#include "voxalign/encoders.hpp"

namespace voxalign {

// Stage-by-stage tensor-shape walkthrough for one adapter + patching setup:
// input volume, per-stage conv output, adapter summary line, patch grid and
// token count. Pure arithmetic; nothing is allocated.
std::string render_shape_trace(const AdapterConfig& adapter,
                               const PatchSpec& patch);

// The 256^3 reference setup (depth reduction 8, 4x16x16 patches). The
// quoted token budget for that setup is 256; the computed grid is 2048, and
// the trace flags the mismatch. All shape arithmetic in this codebase uses
// the computed value.
std::string render_reference_shape_trace();

inline constexpr std::size_t kReferenceQuotedTokens = 256;

}  // namespace voxalign
