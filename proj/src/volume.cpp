#include "voxalign/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "voxalign/common.hpp"

namespace voxalign {

const char* label_name(Label label) {
    switch (label) {
        case Label::AD: return "AD";
        case Label::CN: return "CN";
        case Label::MCI: return "MCI";
    }
    throw DataError("invalid label value");
}

Label label_from_name(std::string_view name) {
    if (name == "AD") return Label::AD;
    if (name == "CN") return Label::CN;
    if (name == "MCI") return Label::MCI;
    throw DataError("unknown label '" + std::string(name) + "'");
}

VolumeGrid resample_trilinear(const VolumeGrid& grid,
                              std::array<std::size_t, 3> target_dims) {
    for (int a = 0; a < 3; ++a) {
        if (grid.dims[a] < 2) {
            throw ConfigError("resample_trilinear: source extent " +
                              std::to_string(grid.dims[a]) + " on axis " +
                              std::to_string(a) + " is below 2");
        }
        if (target_dims[a] < 2) {
            throw ConfigError("resample_trilinear: target extent " +
                              std::to_string(target_dims[a]) + " on axis " +
                              std::to_string(a) + " is below 2");
        }
    }
    VolumeGrid out;
    out.dims = target_dims;
    out.voxels.resize(out.voxel_count());

    struct AxisSample {
        std::size_t i0, i1;
        double frac;
    };
    std::array<std::vector<AxisSample>, 3> axes;
    for (int a = 0; a < 3; ++a) {
        axes[a].resize(target_dims[a]);
        const double scale = static_cast<double>(grid.dims[a] - 1) /
                             static_cast<double>(target_dims[a] - 1);
        for (std::size_t i = 0; i < target_dims[a]; ++i) {
            const double c = static_cast<double>(i) * scale;
            std::size_t i0 = static_cast<std::size_t>(c);
            if (i0 >= grid.dims[a] - 1) i0 = grid.dims[a] - 2;
            const double frac = c - static_cast<double>(i0);
            axes[a][i] = {i0, i0 + 1, frac};
        }
    }

    for (std::size_t d = 0; d < target_dims[0]; ++d) {
        const AxisSample& sd = axes[0][d];
        for (std::size_t h = 0; h < target_dims[1]; ++h) {
            const AxisSample& sh = axes[1][h];
            for (std::size_t w = 0; w < target_dims[2]; ++w) {
                const AxisSample& sw = axes[2][w];
                const double c000 = grid.at(sd.i0, sh.i0, sw.i0);
                const double c001 = grid.at(sd.i0, sh.i0, sw.i1);
                const double c010 = grid.at(sd.i0, sh.i1, sw.i0);
                const double c011 = grid.at(sd.i0, sh.i1, sw.i1);
                const double c100 = grid.at(sd.i1, sh.i0, sw.i0);
                const double c101 = grid.at(sd.i1, sh.i0, sw.i1);
                const double c110 = grid.at(sd.i1, sh.i1, sw.i0);
                const double c111 = grid.at(sd.i1, sh.i1, sw.i1);
                const double c00 = c000 + (c001 - c000) * sw.frac;
                const double c01 = c010 + (c011 - c010) * sw.frac;
                const double c10 = c100 + (c101 - c100) * sw.frac;
                const double c11 = c110 + (c111 - c110) * sw.frac;
                const double c0 = c00 + (c01 - c00) * sh.frac;
                const double c1 = c10 + (c11 - c10) * sh.frac;
                out.at(d, h, w) = c0 + (c1 - c0) * sd.frac;
            }
        }
    }
    return out;
}

VolumeGrid normalize_intensity(const VolumeGrid& grid) {
    VolumeGrid out;
    out.dims = grid.dims;
    out.voxels.resize(grid.voxels.size());
    if (grid.voxels.empty()) return out;
    const auto [mn_it, mx_it] =
        std::minmax_element(grid.voxels.begin(), grid.voxels.end());
    const double mn = *mn_it;
    const double mx = *mx_it;
    if (mx == mn) {
        std::fill(out.voxels.begin(), out.voxels.end(), 0.0);
        return out;
    }
    const double range = mx - mn;
    for (std::size_t i = 0; i < grid.voxels.size(); ++i) {
        out.voxels[i] = (grid.voxels[i] - mn) / range;
    }
    return out;
}

double to_storage_precision(double v) {
    return static_cast<double>(static_cast<float>(v));
}

namespace {

constexpr char kMagic[8] = {'V', 'O', 'L', 'G', 'R', 'I', 'D', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    std::filesystem::path p = path;
    p.replace_extension(".meta");
    return p;
}

}  // namespace

void store_volume(const VolumeSample& sample, const std::filesystem::path& path) {
    const VolumeGrid& g = sample.grid;
    if (g.voxels.size() != g.voxel_count()) {
        throw DataError("volume voxel count does not match dims");
    }
    std::string blob;
    blob.reserve(8 + 16 + g.voxels.size() * 4 + 4);
    blob.append(kMagic, 8);
    put_u32_le(blob, kFormatVersion);
    for (std::size_t d : g.dims) put_u32_le(blob, static_cast<std::uint32_t>(d));
    const std::size_t payload_off = blob.size();
    for (double v : g.voxels) {
        put_u32_le(blob, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    const std::uint32_t checksum = byte_sum_checksum(
        blob.data() + payload_off, blob.size() - payload_off);
    put_u32_le(blob, checksum);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for write: " + path.string());
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw DataError("write failed: " + path.string());
    f.close();

    std::ofstream m(sidecar_path(path), std::ios::trunc);
    if (!m) {
        throw DataError("cannot open for write: " + sidecar_path(path).string());
    }
    m << "subject_id=" << sample.subject_id << "\n"
      << "label=" << label_name(sample.label) << "\n"
      << "processing_tag=" << sample.processing_tag << "\n";
    if (!m) throw DataError("write failed: " + sidecar_path(path).string());
}

VolumeSample load_volume(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open volume file: " + path.string());
    std::string blob((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());

    if (blob.size() < 24 || std::memcmp(blob.data(), kMagic, 8) != 0) {
        throw DataError("bad magic, not a volume file: " + path.string());
    }
    const std::uint32_t version = get_u32_le(p + 8);
    if (version != kFormatVersion) {
        throw DataError("unsupported volume format version " +
                        std::to_string(version) + ": " + path.string());
    }
    VolumeSample sample;
    VolumeGrid& g = sample.grid;
    for (int a = 0; a < 3; ++a) g.dims[a] = get_u32_le(p + 12 + 4 * a);
    const std::size_t payload_bytes = g.voxel_count() * 4;
    const std::size_t want = 24 + payload_bytes + 4;
    if (blob.size() < want) {
        throw DataError("truncated volume payload: " + path.string());
    }
    if (blob.size() > want) {
        throw DataError("volume payload length does not match header dims: " +
                        path.string());
    }
    const std::uint32_t stored_sum = get_u32_le(p + want - 4);
    const std::uint32_t actual_sum = byte_sum_checksum(p + 24, payload_bytes);
    if (stored_sum != actual_sum) {
        throw DataError("volume checksum mismatch: " + path.string());
    }
    g.voxels.resize(g.voxel_count());
    for (std::size_t i = 0; i < g.voxels.size(); ++i) {
        g.voxels[i] = static_cast<double>(
            std::bit_cast<float>(get_u32_le(p + 24 + 4 * i)));
    }

    std::ifstream m(sidecar_path(path));
    if (!m) {
        throw DataError("missing volume sidecar: " + sidecar_path(path).string());
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(m, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DataError("malformed sidecar line '" + line + "' in " +
                            sidecar_path(path).string());
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"subject_id", "label", "processing_tag"}) {
        if (!kv.count(key)) {
            throw DataError("sidecar missing key '" + std::string(key) + "': " +
                            sidecar_path(path).string());
        }
    }
    sample.subject_id = kv["subject_id"];
    sample.label = label_from_name(kv["label"]);
    sample.processing_tag = kv["processing_tag"];
    return sample;
}

}  // namespace voxalign
