#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mvgeom/style_metrics.hpp"

using namespace mvgeom;

namespace {

ImageBuf solid(double r, double g, double b, std::size_t h = 1, std::size_t w = 1) {
  ImageBuf img(h, w);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    img.values[i * 3 + 0] = r;
    img.values[i * 3 + 1] = g;
    img.values[i * 3 + 2] = b;
  }
  return img;
}

ChannelHistogram random_hist(std::mt19937_64& rng, std::size_t bins, bool sparse) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(bins);
  double sum = 0.0;
  for (auto& x : v) {
    x = (sparse && u(rng) < 0.5) ? 0.0 : u(rng);
    sum += x;
  }
  if (sum == 0.0) {
    v[0] = 1.0;
    sum = 1.0;
  }
  for (auto& x : v) x /= sum;
  return ChannelHistogram::from_bins(v);
}

// Independent form: sqrt(1 - Bhattacharyya coefficient).
double hellinger_bc(const ChannelHistogram& p, const ChannelHistogram& q) {
  double bc = 0.0;
  for (std::size_t k = 0; k < p.bin_count(); ++k) bc += std::sqrt(p.bins()[k] * q.bins()[k]);
  return std::sqrt(std::max(0.0, 1.0 - bc));
}

ImageBuf random_image(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::uniform_int_distribution<int> level(0, 255);
  ImageBuf img(h, w);
  for (auto& v : img.values) v = level(rng) / 255.0;
  return img;
}

}  // namespace

TEST(Histogram, AllZeroChannelFillsFirstBin) {
  const auto h = histogram(solid(0, 0, 0, 3, 3), Channel::R, 4);
  EXPECT_EQ(h.bins(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(Histogram, ValueOneLandsInLastBin) {
  ImageBuf img(1, 2);
  img.at(0, 0, 1) = 0.0;
  img.at(0, 1, 1) = 1.0;
  EXPECT_EQ(histogram(img, Channel::G, 2).bins(), (std::vector<double>{0.5, 0.5}));
}

TEST(Histogram, EightBitRampFillsEveryBinOnce) {
  ImageBuf img(16, 16);
  for (std::size_t i = 0; i < 256; ++i) img.values[i * 3 + 2] = static_cast<double>(i) / 255.0;
  const auto h = histogram(img, Channel::B, 256);
  for (std::size_t k = 0; k < 256; ++k) {
    // Enumerated mapping: level i goes to floor(i/255 * 256), which is i for i < 255 and clamps 255 -> 255.
    const auto expected_bin = std::min<std::size_t>(static_cast<std::size_t>(std::floor(k / 255.0 * 256.0)), 255);
    EXPECT_EQ(expected_bin, k);
    EXPECT_DOUBLE_EQ(h.bins()[k], 1.0 / 256.0);
  }
}

TEST(Histogram, RejectsEmptyImageAndZeroBins) {
  EXPECT_THROW(histogram(ImageBuf(), Channel::R, 4), Error);
  EXPECT_THROW(histogram(solid(0, 0, 0), Channel::R, 0), Error);
  EXPECT_THROW(ChannelHistogram::from_bins({0.5, 0.4}), Error);
  EXPECT_THROW(ChannelHistogram::from_bins({1.5, -0.5}), Error);
}

TEST(Hellinger, KnownValues) {
  const auto p = ChannelHistogram::from_bins({0.5, 0.5});
  const auto q = ChannelHistogram::from_bins({1.0, 0.0});
  EXPECT_EQ(hellinger(p, p), 0.0);
  EXPECT_NEAR(hellinger(ChannelHistogram::from_bins({1, 0}), ChannelHistogram::from_bins({0, 1})), 1.0, 1e-12);
  EXPECT_NEAR(hellinger(p, q), std::sqrt(1.0 - std::sqrt(0.5)), 1e-12);
  EXPECT_NEAR(hellinger(p, q), 0.541196, 1e-6);
  EXPECT_THROW(hellinger(p, ChannelHistogram::from_bins({1, 0, 0})), Error);
}

TEST(Hellinger, MetricPropertiesOnRandomHistograms) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t bins = 1 + trial % 40;
    const bool sparse = trial % 3 == 0;
    const auto p = random_hist(rng, bins, sparse), q = random_hist(rng, bins, sparse), r = random_hist(rng, bins, sparse);
    const double pq = hellinger(p, q), qp = hellinger(q, p);
    EXPECT_EQ(pq, qp);
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0);
    EXPECT_NEAR(pq, hellinger_bc(p, q), 1e-7);
    EXPECT_LE(hellinger(p, r), pq + hellinger(q, r) + 1e-12);
  }
}

TEST(Chd, IdentityAndHandCase) {
  std::mt19937_64 rng(1);
  const ImageBuf img = random_image(rng, 9, 7);
  EXPECT_EQ(chd(img, img), 0.0);
  const double red_blue = chd(solid(1, 0, 0), solid(0, 0, 1), 2);
  EXPECT_NEAR(red_blue, 2.0 / 3.0, 1e-12);
}

TEST(Chd, InvariantUnderPixelReplication) {
  std::mt19937_64 rng(2);
  const ImageBuf small = random_image(rng, 6, 5), style = random_image(rng, 4, 8);
  ImageBuf big(12, 15);
  for (std::size_t y = 0; y < 12; ++y)
    for (std::size_t x = 0; x < 15; ++x)
      for (std::size_t c = 0; c < 3; ++c) big.at(y, x, c) = small.at(y / 2, x / 3, c);
  EXPECT_NEAR(chd(big, style), chd(small, style), 1e-12);
}

TEST(ChdAverage, SingletonsPairsAndHandValues) {
  std::mt19937_64 rng(4);
  const ImageBuf style = random_image(rng, 5, 5);
  const ImageBuf a = random_image(rng, 5, 5), b = random_image(rng, 3, 4);
  std::vector<ImageBuf> one{a}, twice{a, a}, both{a, b};
  EXPECT_EQ(chd_average(one, style), chd(a, style));
  EXPECT_NEAR(chd_average(twice, style), chd(a, style), 1e-15);

  // Hand-built: 1x1 pure colors at B=2.
  const ImageBuf red = solid(1, 0, 0), green = solid(0, 1, 0), blue = solid(0, 0, 1);
  std::vector<ImageBuf> set{red, green};
  const double ca = (1.0 + 0.0 + 1.0) / 3.0;  // red vs blue: R, B disjoint; G both at bin 0.
  const double cb = (0.0 + 1.0 + 1.0) / 3.0;  // green vs blue: G, B disjoint; R both at bin 0.
  EXPECT_NEAR(chd_average(set, blue, 2), (ca + cb) / 2.0, 1e-12);
  EXPECT_NEAR(chd_average(both, style, 256, 3), (chd(a, style) + chd(b, style)) / 2.0, 1e-15);
  EXPECT_THROW(chd_average(std::vector<ImageBuf>{}, style), Error);
}

TEST(Chd, RangeOnRandomImages) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const double v = chd(random_image(rng, 4, 4), random_image(rng, 3, 3), 1 + i * 5);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}
