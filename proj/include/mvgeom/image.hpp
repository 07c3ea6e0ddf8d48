#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>
#include <jerror.h>

#include "mvgeom/error.hpp"

namespace mvgeom {

/// H x W x 3 image, row-major and channel-interleaved, values in [0, 1].
struct ImageBuf {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  static constexpr std::size_t channels = 3;

  ImageBuf() = default;
  ImageBuf(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w * 3, fill) {}

  std::size_t pixel_count() const { return height * width; }
  bool empty() const { return height == 0 || width == 0; }

  double& at(std::size_t y, std::size_t x, std::size_t c) { return values[(y * width + x) * 3 + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return values[(y * width + x) * 3 + c]; }

  bool operator==(const ImageBuf&) const = default;
};

namespace detail {

inline std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline ImageBuf decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(ErrorCode::DecodeFailure, name + ": " + image.message);

  // Decode to RGBA and drop alpha ourselves; asking libpng for RGB would
  // composite translucent pixels instead.
  image.format = PNG_FORMAT_RGBA;
  std::vector<png_byte> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::DecodeFailure, name + ": " + msg);
  }

  ImageBuf out(image.height, image.width);
  for (std::size_t i = 0; i < out.pixel_count(); ++i)
    for (std::size_t c = 0; c < 3; ++c) out.values[i * 3 + c] = rgba[i * 4 + c] / 255.0;
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
  bool truncated;
};

extern "C" inline void mvgeom_jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

extern "C" inline void mvgeom_jpeg_emit_message(j_common_ptr cinfo, int level) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  // libjpeg pads a truncated stream with gray and only warns; we reject it.
  if (level < 0 && cinfo->err->msg_code == JWRN_JPEG_EOF) err->truncated = true;
}

// Returns 0 on success, 1 on a libjpeg error, 2 on an unsupported color space.
// No objects with destructors in this function (longjmp target).
inline int decode_jpeg_raw(const unsigned char* data, std::size_t size, std::vector<unsigned char>& rgb,
                           JDIMENSION& width, JDIMENSION& height, JpegErrorManager& err) {
  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = mvgeom_jpeg_error_exit;
  err.pub.emit_message = mvgeom_jpeg_emit_message;
  err.truncated = false;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return 1;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    jpeg_destroy_decompress(&cinfo);
    return 2;
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = cinfo.output_width;
  height = cinfo.output_height;
  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return 0;
}

inline ImageBuf decode_jpeg(const std::vector<unsigned char>& bytes, const std::string& name) {
  std::vector<unsigned char> rgb;
  JDIMENSION width = 0, height = 0;
  JpegErrorManager err;
  const int rc = decode_jpeg_raw(bytes.data(), bytes.size(), rgb, width, height, err);
  if (rc == 2) throw Error(ErrorCode::UnsupportedColorType, name + ": CMYK/YCCK JPEG");
  if (rc != 0) throw Error(ErrorCode::DecodeFailure, name + ": " + err.message);
  if (err.truncated) throw Error(ErrorCode::DecodeFailure, name + ": premature end of JPEG data");

  ImageBuf out(height, width);
  for (std::size_t i = 0; i < rgb.size(); ++i) out.values[i] = rgb[i] / 255.0;
  return out;
}

}  // namespace detail

/// Decodes a PNG or JPEG (sniffed from the leading bytes) to RGB in [0, 1].
/// Grayscale is replicated to three channels; alpha is dropped.
inline ImageBuf read_image(const std::filesystem::path& path) {
  const auto bytes = detail::slurp(path);
  const std::string name = path.string();
  static constexpr unsigned char kPng[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) return detail::decode_png(bytes, name);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return detail::decode_jpeg(bytes, name);
  throw Error(ErrorCode::DecodeFailure, name + ": not a PNG or JPEG file");
}

/// Writes an 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
inline void write_png(const std::filesystem::path& path, const ImageBuf& img) {
  if (img.empty()) throw Error(ErrorCode::EmptyImage, path.string());
  std::vector<png_byte> rgb(img.values.size());
  for (std::size_t i = 0; i < rgb.size(); ++i)
    rgb[i] = static_cast<png_byte>(std::lround(std::clamp(img.values[i], 0.0, 1.0) * 255.0));

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr))
    throw Error(ErrorCode::IoFailure, path.string() + ": " + image.message);
}

}  // namespace mvgeom
