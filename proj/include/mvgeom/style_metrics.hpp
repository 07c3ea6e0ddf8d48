#pragma once

// Color Histogram Distance: per-channel normalized histograms compared by
// Hellinger distance, averaged over the three channels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mvgeom/error.hpp"
#include "mvgeom/image.hpp"
#include "mvgeom/parallel.hpp"

namespace mvgeom {

enum class Channel { R = 0, G = 1, B = 2 };

inline constexpr std::size_t kDefaultBins = 256;

class ChannelHistogram {
 public:
  /// Wraps an existing normalized histogram; bins must be non-negative and
  /// sum to 1 within 1e-9.
  static ChannelHistogram from_bins(std::vector<double> bins, Channel channel = Channel::R) {
    if (bins.empty()) throw Error(ErrorCode::ZeroBins, "histogram needs at least one bin");
    double sum = 0.0;
    for (double b : bins) {
      if (!(b >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative histogram bin");
      sum += b;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "histogram does not sum to 1");
    return ChannelHistogram(std::move(bins), channel);
  }

  const std::vector<double>& bins() const { return bins_; }
  std::size_t bin_count() const { return bins_.size(); }
  Channel channel() const { return channel_; }

 private:
  ChannelHistogram(std::vector<double> bins, Channel channel) : bins_(std::move(bins)), channel_(channel) {}
  friend ChannelHistogram histogram(const ImageBuf&, Channel, std::size_t);

  std::vector<double> bins_;
  Channel channel_;
};

/// Uniform bins over [0, 1]; value v lands in floor(v * B), with v == 1 in the
/// last bin.
inline ChannelHistogram histogram(const ImageBuf& img, Channel channel, std::size_t bins) {
  if (img.empty()) throw Error(ErrorCode::EmptyImage, "histogram of empty image");
  if (bins == 0) throw Error(ErrorCode::ZeroBins, "bin count must be positive");

  std::vector<std::size_t> counts(bins, 0);
  const auto c = static_cast<std::size_t>(channel);
  const double scale = static_cast<double>(bins);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double v = std::clamp(img.values[i * 3 + c], 0.0, 1.0);
    const auto k = std::min(static_cast<std::size_t>(std::floor(v * scale)), bins - 1);
    ++counts[k];
  }
  std::vector<double> normalized(bins);
  const double n = static_cast<double>(img.pixel_count());
  for (std::size_t k = 0; k < bins; ++k) normalized[k] = static_cast<double>(counts[k]) / n;
  return ChannelHistogram(std::move(normalized), channel);
}

/// (1 / sqrt 2) * || sqrt(p) - sqrt(q) ||_2, clamped into [0, 1].
inline double hellinger(const ChannelHistogram& p, const ChannelHistogram& q) {
  if (p.bin_count() != q.bin_count()) throw Error(ErrorCode::BinCountMismatch, "hellinger over unequal bin counts");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.bin_count(); ++k) {
    const double d = std::sqrt(p.bins()[k]) - std::sqrt(q.bins()[k]);
    acc += d * d;
  }
  return std::min(1.0, std::sqrt(acc) / std::sqrt(2.0));
}

inline double chd(const ImageBuf& stylized, const ImageBuf& style, std::size_t bins = kDefaultBins) {
  double sum = 0.0;
  for (Channel c : {Channel::R, Channel::G, Channel::B})
    sum += hellinger(histogram(stylized, c, bins), histogram(style, c, bins));
  return sum / 3.0;
}

/// Per-image CHD against a single style image, in input order.
inline std::vector<double> chd_per_image(std::span<const ImageBuf> stylized_set, const ImageBuf& style,
                                         std::size_t bins = kDefaultBins, unsigned threads = 1) {
  std::vector<double> out(stylized_set.size());
  parallel_chunks(stylized_set.size(), 1, threads, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = chd(stylized_set[i], style, bins);
  });
  return out;
}

inline double chd_average(std::span<const ImageBuf> stylized_set, const ImageBuf& style,
                          std::size_t bins = kDefaultBins, unsigned threads = 1) {
  if (stylized_set.empty()) throw Error(ErrorCode::EmptySet, "chd_average over an empty set");
  const auto per_image = chd_per_image(stylized_set, style, bins, threads);
  double sum = 0.0;
  for (double v : per_image) sum += v;
  return sum / static_cast<double>(per_image.size());
}

}  // namespace mvgeom
