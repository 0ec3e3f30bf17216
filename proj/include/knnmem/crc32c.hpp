#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace knnmem {

/// CRC-32C (Castagnoli polynomial 0x1EDC6F41, reflected, init/xorout ~0).
std::uint32_t crc32c(std::span<const std::byte> data);

}  // namespace knnmem
