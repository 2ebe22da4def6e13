#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "faceswap/error.hpp"
#include "faceswap/file_io.hpp"
#include "faceswap/image.hpp"

namespace faceswap {

namespace png_detail {

struct Decoded {
  int width = 0;
  int height = 0;
  png_uint_32 file_format = 0;
  std::vector<std::uint8_t> pixels;
};

/// Decodes into the requested libpng simplified-API format.
inline Decoded decode(const std::string& bytes, png_uint_32 format, const std::string& name) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    fail(ErrorCode::kParseMalformedHeader, name + ": " + img.message);
  Decoded out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.file_format = img.format;
  img.format = format;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorCode::kParseTruncated, name + ": " + msg);
  }
  return out;
}

inline std::string encode(int width, int height, png_uint_32 format, const void* pixels) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels, 0, nullptr))
    fail(ErrorCode::kIo, std::string("png encode: ") + img.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0, nullptr))
    fail(ErrorCode::kIo, std::string("png encode: ") + img.message);
  out.resize(size);
  return out;
}

}  // namespace png_detail

inline std::string encode_png(const Image& image) {
  return png_detail::encode(image.width, image.height, PNG_FORMAT_RGB, image.data.data());
}

inline Image decode_png_image(const std::string& bytes, const std::string& name = "image") {
  auto d = png_detail::decode(bytes, PNG_FORMAT_RGB, name);
  Image out;
  out.width = d.width;
  out.height = d.height;
  out.data = std::move(d.pixels);
  return out;
}

/// 8-bit grayscale, 0 = background, 255 = face.
inline std::string encode_png(const Mask& mask) {
  std::vector<std::uint8_t> gray(mask.labels.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.labels[i] ? 255 : 0;
  return png_detail::encode(mask.width, mask.height, PNG_FORMAT_GRAY, gray.data());
}

/// Rejects color files and any value other than 0 or 255.
inline Mask decode_png_mask(const std::string& bytes, const std::string& name = "mask") {
  auto d = png_detail::decode(bytes, PNG_FORMAT_GRAY, name);
  if (d.file_format & PNG_FORMAT_FLAG_COLOR)
    fail(ErrorCode::kInvalidArgument, name + ": mask must be single-channel");
  Mask out(d.width, d.height);
  for (std::size_t i = 0; i < d.pixels.size(); ++i) {
    const auto v = d.pixels[i];
    if (v != 0 && v != 255)
      fail(ErrorCode::kInvalidArgument, name + ": pixel (" + std::to_string(i % d.width) + ", " +
                                            std::to_string(i / d.width) + ") has value " +
                                            std::to_string(v) + "; masks must be 0 or 255");
    out.labels[i] = v ? 1 : 0;
  }
  return out;
}

/// 16-bit grayscale of raw values.
inline std::string encode_png16(int width, int height, const std::vector<std::uint16_t>& values) {
  require(values.size() == static_cast<std::size_t>(width) * height, "16-bit buffer size mismatch");
  return png_detail::encode(width, height, PNG_FORMAT_LINEAR_Y, values.data());
}

inline std::vector<std::uint16_t> decode_png16(const std::string& bytes, int& width, int& height,
                                               const std::string& name = "png16") {
  auto d = png_detail::decode(bytes, PNG_FORMAT_LINEAR_Y, name);
  width = d.width;
  height = d.height;
  std::vector<std::uint16_t> out(d.pixels.size() / 2);
  std::memcpy(out.data(), d.pixels.data(), d.pixels.size());
  return out;
}

inline std::string encode_png(const RegionMap& regions) {
  require(regions.count <= 65536, "region count exceeds 16-bit PNG range");
  std::vector<std::uint16_t> v(regions.ids.begin(), regions.ids.end());
  return encode_png16(regions.width, regions.height, v);
}

inline RegionMap decode_png_regions(const std::string& bytes, const std::string& name = "regions") {
  RegionMap out;
  const auto v = decode_png16(bytes, out.width, out.height, name);
  out.ids.assign(v.begin(), v.end());
  for (auto id : out.ids) out.count = std::max(out.count, id + 1);
  out.validate();
  return out;
}

inline Image load_image(const std::filesystem::path& path) {
  return decode_png_image(read_text(path), path.string());
}
inline Mask load_mask(const std::filesystem::path& path) {
  return decode_png_mask(read_text(path), path.string());
}
inline RegionMap load_regions(const std::filesystem::path& path) {
  return decode_png_regions(read_text(path), path.string());
}
template <typename T>
void save_png(const T& value, const std::filesystem::path& path) {
  write_file_atomic(path, encode_png(value));
}

}  // namespace faceswap
