#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <zlib.h>

#include "bevfuse/errors.hpp"

namespace bevfuse {

// Fixed-function PNG encoder: 8-bit RGB, no interlace, one zlib-compressed
// IDAT with filter type 0 on every row. Compression level is pinned so the
// byte stream is reproducible.
namespace png {

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::vector<std::uint8_t>& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc =
      crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + payload.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

// pixels: row-major RGB triples, size = width * height * 3.
inline std::vector<std::uint8_t> encode_rgb8(
    int width, int height, const std::vector<std::uint8_t>& pixels) {
  if (width <= 0 || height <= 0 ||
      pixels.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ValidationError("pixel buffer does not match image dimensions");
  }
  std::vector<std::uint8_t> raw;
  raw.reserve(pixels.size() + height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    const std::size_t row = static_cast<std::size_t>(y) * width * 3;
    raw.insert(raw.end(), pixels.begin() + row,
               pixels.begin() + row + static_cast<std::size_t>(width) * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw IoError("zlib compression failed");
  }
  compressed.resize(bound);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a,
                                   '\n'};
  std::vector<std::uint8_t> ihdr;
  detail::put_u32(ihdr, static_cast<std::uint32_t>(width));
  detail::put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", compressed);
  detail::put_chunk(out, "IEND", {});
  return out;
}

}  // namespace png
}  // namespace bevfuse
