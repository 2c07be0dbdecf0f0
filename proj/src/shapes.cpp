#include "voxalign/shapes.hpp"

#include "voxalign/ops.hpp"

namespace voxalign {

namespace {

std::string triple(std::size_t a, std::size_t b, std::size_t c) {
    return "(" + std::to_string(a) + "," + std::to_string(b) + "," +
           std::to_string(c) + ")";
}

std::string triple(const std::array<std::size_t, 3>& d) {
    return triple(d[0], d[1], d[2]);
}

}  // namespace

std::string render_shape_trace(const AdapterConfig& adapter,
                               const PatchSpec& patch) {
    validate_adapter_config(adapter);
    const auto in = adapter.input_dims;
    const auto out = adapter.output_dims();

    std::string s;
    s += "volume: " + triple(in) + "\n";
    std::size_t c_in = 1;
    std::size_t depth = in[0];
    for (std::size_t i = 0; i < adapter.stage_channels.size(); ++i) {
        const std::size_t c_out = adapter.stage_channels[i];
        s += "  stage " + std::to_string(i) + ": " + std::to_string(c_in) +
             "ch " + triple(depth, in[1], in[2]);
        depth /= 2;
        s += " -> " + std::to_string(c_out) + "ch " +
             triple(depth, in[1], in[2]) + "  (conv stride (2,1,1))\n";
        c_in = c_out;
    }
    if (adapter.residual_block) {
        s += "  residual block: " + triple(depth, in[1], in[2]) +
             " (shape preserved)\n";
    }
    s += "adapter: " + triple(in) + " -> " + triple(out) + "\n";

    const auto& p = patch.patch_dims;
    const std::size_t patches = ops::patch_count(out, p);
    s += "patch: " + triple(p) + "\n";
    s += "patch grid: " + std::to_string(out[0] / p[0]) + " x " +
         std::to_string(out[1] / p[1]) + " x " + std::to_string(out[2] / p[2]) +
         "\n";
    s += "patches: " + std::to_string(patches) + "\n";
    return s;
}

std::string render_reference_shape_trace() {
    AdapterConfig ref;
    ref.input_dims = {256, 256, 256};
    ref.depth_reduction = 8;
    ref.stage_channels = {8, 8, 1};
    PatchSpec patch;  // 4 x 16 x 16

    std::string s = "reference configuration\n";
    s += render_shape_trace(ref, patch);
    s += "token width: 768\n";
    const std::size_t computed =
        ops::patch_count(ref.output_dims(), patch.patch_dims);
    if (computed != kReferenceQuotedTokens) {
        s += "note: the commonly quoted token budget for this setup is " +
             std::to_string(kReferenceQuotedTokens) +
             ", but the patch arithmetic above yields " +
             std::to_string(computed) + " (factor " +
             std::to_string(computed / kReferenceQuotedTokens) +
             "); the computed count is what this implementation uses "
             "throughout.\n";
    }
    return s;
}

}  // namespace voxalign
