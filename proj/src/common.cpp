#include "voxalign/common.hpp"

namespace voxalign {

std::uint32_t byte_sum_checksum(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i < size; ++i) sum += p[i];  // wraps mod 2^32
    return sum;
}

}  // namespace voxalign
