#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace voxalign {

// Error taxonomy used for CLI exit codes: ConfigError -> 1, DataError -> 2,
// VerifyError -> 3. Everything else is treated as a validation failure.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VerifyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Byte-sum checksum used by the volume and checkpoint formats.
std::uint32_t byte_sum_checksum(const void* bytes, std::size_t n);

}  // namespace voxalign
