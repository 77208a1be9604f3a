#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

namespace depthfuse::io {

inline std::uint32_t load_le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
inline std::uint32_t load_be32(const unsigned char* p) {
  return std::uint32_t(p[3]) | (std::uint32_t(p[2]) << 8) |
         (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[0]) << 24);
}
inline void store_le32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}
inline void store_be32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[3 - i] = static_cast<unsigned char>(v >> (8 * i));
}

// Writes to "<path>.tmp" and renames over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace depthfuse::io
