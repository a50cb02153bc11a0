#include "erank/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace erank::png {

namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_begin = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0, out.data() + crc_begin, static_cast<uInt>(out.size() - crc_begin));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> zlib_compress(const std::vector<std::uint8_t>& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(bound);
  if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t> zlib_decompress(const std::vector<std::uint8_t>& in,
                                          std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf size = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &size, in.data(), static_cast<uLong>(in.size()));
  if (rc != Z_OK || size != expected) throw std::runtime_error("png: inflate failed");
  return out;
}

int bytes_per_pixel(Format f) {
  switch (f) {
    case Format::kGray8: return 1;
    case Format::kGray16: return 2;
    case Format::kRgb8: return 3;
  }
  return 0;
}

std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

}  // namespace

std::vector<std::uint8_t> encode(const Buffer& buf) {
  if (buf.width <= 0 || buf.height <= 0) throw std::invalid_argument("png: empty image");
  const int bpp = bytes_per_pixel(buf.format);
  const std::size_t n = static_cast<std::size_t>(buf.width) * buf.height;
  const std::size_t stride = static_cast<std::size_t>(buf.width) * bpp;

  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * buf.height);
  for (int y = 0; y < buf.height; ++y) {
    raw.push_back(0);  // filter: none
    for (int x = 0; x < buf.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * buf.width + x;
      switch (buf.format) {
        case Format::kGray8:
          raw.push_back(buf.gray8.at(i));
          break;
        case Format::kGray16:
          raw.push_back(static_cast<std::uint8_t>(buf.gray16.at(i) >> 8));
          raw.push_back(static_cast<std::uint8_t>(buf.gray16.at(i) & 0xff));
          break;
        case Format::kRgb8:
          raw.push_back(buf.rgb8.at(3 * i));
          raw.push_back(buf.rgb8.at(3 * i + 1));
          raw.push_back(buf.rgb8.at(3 * i + 2));
          break;
      }
    }
  }
  (void)n;

  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(buf.width));
  put_u32(ihdr, static_cast<std::uint32_t>(buf.height));
  ihdr.push_back(buf.format == Format::kGray16 ? 16 : 8);           // bit depth
  ihdr.push_back(buf.format == Format::kRgb8 ? 2 : 0);              // color type
  ihdr.push_back(0);                                                // compression
  ihdr.push_back(0);                                                // filter
  ihdr.push_back(0);                                                // interlace

  std::vector<std::uint8_t> out(kSignature, kSignature + 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", zlib_compress(raw));
  append_chunk(out, "IEND", {});
  return out;
}

Buffer decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
    throw std::runtime_error("png: bad signature");

  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  bool saw_ihdr = false;
  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = get_u32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw std::runtime_error("png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* data = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(get_u32(data));
      height = static_cast<int>(get_u32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (data[12] != 0) throw std::runtime_error("png: interlaced input unsupported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || width <= 0 || height <= 0) throw std::runtime_error("png: missing IHDR");

  Format format;
  if (color_type == 0 && bit_depth == 8) format = Format::kGray8;
  else if (color_type == 0 && bit_depth == 16) format = Format::kGray16;
  else if (color_type == 2 && bit_depth == 8) format = Format::kRgb8;
  else throw std::runtime_error("png: unsupported color type / bit depth");

  const int bpp = bytes_per_pixel(format);
  const std::size_t stride = static_cast<std::size_t>(width) * bpp;
  std::vector<std::uint8_t> raw =
      zlib_decompress(idat, (stride + 1) * static_cast<std::size_t>(height));

  // Undo per-scanline filters (all five standard types).
  std::vector<std::uint8_t> flat(stride * height);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[(stride + 1) * y];
    const std::uint8_t* src = &raw[(stride + 1) * y + 1];
    std::uint8_t* dst = &flat[stride * y];
    const std::uint8_t* up = y > 0 ? &flat[stride * (y - 1)] : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int left = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
      const int above = up ? up[i] : 0;
      const int corner = (up && i >= static_cast<std::size_t>(bpp)) ? up[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, corner); break;
        default: throw std::runtime_error("png: unknown filter type");
      }
      dst[i] = static_cast<std::uint8_t>(v);
    }
  }

  Buffer buf;
  buf.width = width;
  buf.height = height;
  buf.format = format;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  switch (format) {
    case Format::kGray8:
      buf.gray8.assign(flat.begin(), flat.end());
      break;
    case Format::kGray16:
      buf.gray16.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        buf.gray16[i] = static_cast<std::uint16_t>((flat[2 * i] << 8) | flat[2 * i + 1]);
      break;
    case Format::kRgb8:
      buf.rgb8.assign(flat.begin(), flat.end());
      break;
  }
  return buf;
}

void write_file(const std::string& path, const Buffer& buf) {
  const auto bytes = encode(buf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("png: cannot open for write: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("png: write failed: " + path);
}

Buffer read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("png: cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace erank::png
