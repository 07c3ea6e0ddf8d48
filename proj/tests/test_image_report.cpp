#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <random>

#include "mvgeom/image.hpp"
#include "mvgeom/report.hpp"
#include "test_util.hpp"

using namespace mvgeom;
using testutil::TempDir;

namespace {

void write_gray_png(const fs::path& p, std::size_t w, std::size_t h, const std::vector<png_byte>& gray) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_GRAY;
  ASSERT_TRUE(png_image_write_to_file(&image, p.string().c_str(), 0, gray.data(), 0, nullptr));
}

void write_rgba_png(const fs::path& p, const std::vector<png_byte>& rgba) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = 1;
  image.height = 1;
  image.format = PNG_FORMAT_RGBA;
  ASSERT_TRUE(png_image_write_to_file(&image, p.string().c_str(), 0, rgba.data(), 0, nullptr));
}

std::vector<unsigned char> encode_jpeg(int w, int h, int components, J_COLOR_SPACE space) {
  jpeg_compress_struct cinfo;
  jpeg_error_mgr jerr;
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  unsigned char* buf = nullptr;
  unsigned long size = 0;
  jpeg_mem_dest(&cinfo, &buf, &size);
  cinfo.image_width = w;
  cinfo.image_height = h;
  cinfo.input_components = components;
  cinfo.in_color_space = space;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 100, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * components);
  while (cinfo.next_scanline < cinfo.image_height) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < components; ++c) row[x * components + c] = static_cast<unsigned char>((x * 37 + c * 80) % 256);
    JSAMPROW r = row.data();
    jpeg_write_scanlines(&cinfo, &r, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<unsigned char> out(buf, buf + size);
  std::free(buf);
  return out;
}

ErrorCode image_error(const fs::path& p) {
  try {
    read_image(p);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Image, SingleRedPixelScalesToUnit) {
  TempDir dir;
  ImageBuf img(1, 1);
  img.at(0, 0, 0) = 1.0;
  write_png(dir / "red.png", img);
  const ImageBuf back = read_image(dir / "red.png");
  ASSERT_EQ(back.height, 1u);
  ASSERT_EQ(back.width, 1u);
  EXPECT_EQ(back.values, (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Image, GrayscaleIsReplicated) {
  TempDir dir;
  write_gray_png(dir / "g.png", 2, 2, {0, 51, 102, 255});
  const ImageBuf img = read_image(dir / "g.png");
  ASSERT_EQ(img.pixel_count(), 4u);
  const double expected[4] = {0.0, 0.2, 0.4, 1.0};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(img.values[i * 3 + c], expected[i]);
}

TEST(Image, AlphaIsDroppedNotComposited) {
  TempDir dir;
  write_rgba_png(dir / "a.png", {255, 102, 0, 10});
  const ImageBuf img = read_image(dir / "a.png");
  EXPECT_EQ(img.values, (std::vector<double>{1.0, 102 / 255.0, 0.0}));
}

TEST(Image, TruncatedFilesFailToDecode) {
  TempDir dir;
  ImageBuf img(16, 16, 0.3);
  write_png(dir / "full.png", img);
  std::string bytes = testutil::read_bytes(dir / "full.png");
  testutil::write_bytes(dir / "cut.png", bytes.substr(0, bytes.size() / 2));
  EXPECT_EQ(image_error(dir / "cut.png"), ErrorCode::DecodeFailure);

  const auto jpg = encode_jpeg(32, 32, 3, JCS_RGB);
  testutil::write_bytes(dir / "cut.jpg", std::string(jpg.begin(), jpg.begin() + jpg.size() / 2));
  EXPECT_EQ(image_error(dir / "cut.jpg"), ErrorCode::DecodeFailure);

  testutil::write_bytes(dir / "junk.png", "not an image at all");
  EXPECT_EQ(image_error(dir / "junk.png"), ErrorCode::DecodeFailure);
  EXPECT_EQ(image_error(dir / "missing.png"), ErrorCode::MissingFile);
}

TEST(Image, JpegDecodesAndCmykIsRejected) {
  TempDir dir;
  const auto jpg = encode_jpeg(8, 4, 3, JCS_RGB);
  testutil::write_bytes(dir / "a.jpg", std::string(jpg.begin(), jpg.end()));
  const ImageBuf img = read_image(dir / "a.jpg");
  EXPECT_EQ(img.width, 8u);
  EXPECT_EQ(img.height, 4u);
  // Decoding the same file twice gives identical values.
  EXPECT_EQ(img, read_image(dir / "a.jpg"));

  const auto cmyk = encode_jpeg(4, 4, 4, JCS_CMYK);
  testutil::write_bytes(dir / "c.jpg", std::string(cmyk.begin(), cmyk.end()));
  EXPECT_EQ(image_error(dir / "c.jpg"), ErrorCode::UnsupportedColorType);
}

TEST(Image, PngRoundTripOfEightBitValues) {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 255);
  ImageBuf img(7, 5);
  for (auto& v : img.values) v = level(rng) / 255.0;
  write_png(dir / "r.png", img);
  EXPECT_EQ(read_image(dir / "r.png"), img);
}

TEST(Report, ZeroValueKeyIsWritten) {
  TempDir dir;
  write_report(dir / "r.json", Report{{"ate_rmse", 0.0}});
  const Report back = read_report(dir / "r.json");
  ASSERT_TRUE(back.contains("ate_rmse"));
  EXPECT_EQ(back["ate_rmse"].get<double>(), 0.0);
}

TEST(Report, ArraysKeepOrder) {
  Report r;
  r["per_frame"] = Report::array();
  for (int i = 9; i >= 0; --i) r["per_frame"].push_back({{"frame_id", i}, {"v", 0.5 * i}});
  const Report back = Report::parse(format_report(r));
  for (int k = 0; k < 10; ++k) EXPECT_EQ(back["per_frame"][k]["frame_id"].get<int>(), 9 - k);
}

TEST(Report, RealsReparseBitIdentically) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> bits;
  Report r;
  r["tenth"] = 0.1;
  r["values"] = Report::array();
  std::vector<double> vals;
  while (vals.size() < 2000) {
    const std::uint64_t b = bits(rng);
    double d;
    std::memcpy(&d, &b, 8);
    if (std::isfinite(d)) vals.push_back(d);
  }
  for (double d : vals) r["values"].push_back(d);
  const Report back = Report::parse(format_report(r));
  EXPECT_EQ(back["tenth"].get<double>(), 0.1);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double got = back["values"][i].get<double>();
    EXPECT_EQ(std::memcmp(&got, &vals[i], 8), 0) << vals[i];
  }
}

TEST(Report, KeysAreSortedAndFormatIsStable) {
  const Report r = {{"b", 1}, {"a", {{"z", 2.5}, {"y", "s"}}}, {"c", Report::array()}};
  EXPECT_EQ(format_report(r), "{\n  \"a\": {\n    \"y\": \"s\",\n    \"z\": 2.5\n  },\n  \"b\": 1,\n  \"c\": []\n}\n");
}

TEST(Report, MalformedJsonIsAnInputError) {
  TempDir dir;
  testutil::write_bytes(dir / "bad.json", "{\"a\": ");
  try {
    read_report(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_FALSE(is_numeric_error(e.code()));
  }
}
