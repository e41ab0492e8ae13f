#include "uvac/common.hpp"

#include <zlib.h>

namespace uvac {

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t seed) {
  return static_cast<std::uint32_t>(
      ::crc32_z(seed, reinterpret_cast<const Bytef*>(bytes.data()), bytes.size()));
}

std::uint32_t crc32(std::string_view text, std::uint32_t seed) {
  return crc32(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), seed);
}

}  // namespace uvac
