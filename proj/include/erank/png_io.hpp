#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace erank::png {

// Minimal PNG codec over zlib, covering the three sample layouts this
// project serializes: 8-bit grayscale, 16-bit grayscale and 8-bit RGB.
// Encoding is byte-deterministic: filter type 0 on every scanline, fixed
// deflate settings, no ancillary chunks.

enum class Format { kGray8, kGray16, kRgb8 };

struct Buffer {
  int width = 0;
  int height = 0;
  Format format = Format::kGray8;
  // kGray8: 1 byte/px. kGray16: host-order uint16 pairs stored as 2 bytes/px
  // (decoded to host order). kRgb8: 3 bytes/px, RGB.
  std::vector<std::uint8_t> gray8;
  std::vector<std::uint16_t> gray16;
  std::vector<std::uint8_t> rgb8;
};

std::vector<std::uint8_t> encode(const Buffer& buf);
Buffer decode(const std::vector<std::uint8_t>& bytes);

void write_file(const std::string& path, const Buffer& buf);
Buffer read_file(const std::string& path);

}  // namespace erank::png
