#include "voxalign/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxalign/common.hpp"

namespace voxalign {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) {
        out.push_back(static_cast<char>((v >> s) & 0xFF));
    }
}

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) {
        out.push_back(static_cast<char>((v >> s) & 0xFF));
    }
}

std::uint32_t get_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
}

std::string shape_token(const Shape& shape) {
    if (shape.empty()) return "scalar";
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s;
}

std::filesystem::path tensor_path(const std::filesystem::path& dir,
                                  const std::string& name) {
    return dir / (name + ".bin");  // names are dot-separated, filesystem-safe
}

}  // namespace

void store_checkpoint(const ParameterStore& store,
                      const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::string manifest = "checkpoint-version=1\n";
    for (const Parameter& p : store.all()) {
        const Shape& shape = p.tensor.shape();
        std::string blob;
        blob.reserve(4 + 4 * shape.size() + 8 * p.tensor.numel());
        put_u32_le(blob, static_cast<std::uint32_t>(shape.size()));
        for (std::size_t e : shape) {
            put_u32_le(blob, static_cast<std::uint32_t>(e));
        }
        const std::size_t payload_off = blob.size();
        for (double v : p.tensor.data()) {
            put_u64_le(blob, std::bit_cast<std::uint64_t>(v));
        }
        const std::uint32_t checksum = byte_sum_checksum(
            blob.data() + payload_off, blob.size() - payload_off);

        const std::filesystem::path path = tensor_path(dir, p.name);
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot open for write: " + path.string());
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!f) throw DataError("write failed: " + path.string());

        manifest += p.name + " " + shape_token(shape) + " " +
                    (p.trainable ? "trainable" : "frozen") + " " +
                    std::to_string(checksum) + "\n";
    }
    const std::filesystem::path mpath = dir / "manifest.txt";
    std::ofstream m(mpath, std::ios::binary | std::ios::trunc);
    if (!m) throw DataError("cannot open for write: " + mpath.string());
    m << manifest;
    if (!m) throw DataError("write failed: " + mpath.string());
}

void load_checkpoint(ParameterStore& store, const std::filesystem::path& dir) {
    const std::filesystem::path mpath = dir / "manifest.txt";
    std::ifstream m(mpath, std::ios::binary);
    if (!m) throw DataError("cannot open checkpoint manifest " + mpath.string());
    std::string line;
    if (!std::getline(m, line) || line != "checkpoint-version=1") {
        throw DataError("unsupported checkpoint manifest header in " +
                        mpath.string());
    }

    std::size_t seen = 0;
    while (std::getline(m, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string name, shape_s, train_s, checksum_s;
        if (!(fields >> name >> shape_s >> train_s >> checksum_s)) {
            throw DataError("malformed checkpoint manifest line: " + line);
        }
        if (!store.has(name)) {
            throw DataError("checkpoint parameter '" + name +
                            "' does not exist in this model");
        }
        Parameter& p = store.at(name);
        ++seen;
        if (shape_token(p.tensor.shape()) != shape_s) {
            throw DataError("checkpoint shape mismatch for '" + name +
                            "': file says " + shape_s + ", model has " +
                            shape_token(p.tensor.shape()));
        }
        if ((train_s == "trainable") != p.trainable) {
            throw DataError("checkpoint trainability mismatch for '" + name +
                            "'");
        }

        const std::filesystem::path path = tensor_path(dir, name);
        std::ifstream f(path, std::ios::binary);
        if (!f) throw DataError("missing checkpoint tensor " + path.string());
        std::string blob((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
        const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
        const std::size_t want =
            4 + 4 * p.tensor.rank() + 8 * p.tensor.numel();
        if (blob.size() != want) {
            throw DataError("checkpoint tensor " + path.string() +
                            " has wrong size");
        }
        if (get_u32_le(bytes) != p.tensor.rank()) {
            throw DataError("checkpoint rank mismatch for '" + name + "'");
        }
        for (std::size_t a = 0; a < p.tensor.rank(); ++a) {
            if (get_u32_le(bytes + 4 + 4 * a) != p.tensor.shape()[a]) {
                throw DataError("checkpoint extent mismatch for '" + name +
                                "'");
            }
        }
        const std::size_t payload_off = 4 + 4 * p.tensor.rank();
        const std::uint32_t checksum = byte_sum_checksum(
            blob.data() + payload_off, blob.size() - payload_off);
        if (std::to_string(checksum) != checksum_s) {
            throw DataError("checkpoint checksum mismatch for '" + name + "'");
        }
        std::vector<double>& data = p.tensor.data();
        for (std::size_t j = 0; j < data.size(); ++j) {
            data[j] = std::bit_cast<double>(
                get_u64_le(bytes + payload_off + 8 * j));
        }
    }
    if (seen != store.size()) {
        throw DataError("checkpoint lists " + std::to_string(seen) +
                        " parameters, model has " +
                        std::to_string(store.size()));
    }
}

}  // namespace voxalign
