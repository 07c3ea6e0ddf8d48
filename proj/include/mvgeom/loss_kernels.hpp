#pragma once

// Reference kernels for the stylizer training objective, evaluated on
// externally supplied features, depths, descriptors and matches. No network
// runs here; every kernel is plain array math.

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mvgeom/error.hpp"
#include "mvgeom/image.hpp"

namespace mvgeom {

/// C x H x W feature tensor, channel-major.
struct FeatureMap {
  std::size_t channels = 0, height = 0, width = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t h, std::size_t w, std::vector<double> v)
      : channels(c), height(h), width(w), values(std::move(v)) {
    if (c == 0 || h == 0 || w == 0) throw Error(ErrorCode::ShapeMismatch, "feature map extents must be >= 1");
    if (values.size() != c * h * w) throw Error(ErrorCode::ShapeMismatch, "feature map size does not match C x H x W");
  }
  FeatureMap(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : FeatureMap(c, h, w, std::vector<double>(c * h * w, fill)) {}

  std::size_t plane() const { return height * width; }
  std::span<const double> channel(std::size_t c) const { return {values.data() + c * plane(), plane()}; }
  std::span<double> channel(std::size_t c) { return {values.data() + c * plane(), plane()}; }

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

inline constexpr std::array<double, 3> kImagenetMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImagenetStd = {0.229, 0.224, 0.225};

/// Per-channel (v - mean) / std with the ImageNet statistics; HWC -> CHW.
inline FeatureMap imagenet_normalize(const ImageBuf& img) {
  if (img.values.size() != img.pixel_count() * 3) throw Error(ErrorCode::WrongChannelCount, "expected 3 channels");
  if (img.empty()) throw Error(ErrorCode::EmptyImage, "imagenet_normalize of empty image");
  FeatureMap out(3, img.height, img.width);
  for (std::size_t c = 0; c < 3; ++c) {
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
      dst[i] = (img.values[i * 3 + c] - kImagenetMean[c]) / kImagenetStd[c];
  }
  return out;
}

struct ChannelStats {
  static constexpr double eps = 1e-5;
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t channels() const { return mean.size(); }
  bool operator==(const ChannelStats&) const = default;
};

/// Spatial mean and sqrt(population variance + 1e-5) per channel.
inline ChannelStats channel_stats(const FeatureMap& f) {
  ChannelStats s;
  s.mean.resize(f.channels);
  s.std.resize(f.channels);
  const double n = static_cast<double>(f.plane());
  for (std::size_t c = 0; c < f.channels; ++c) {
    const auto ch = f.channel(c);
    double sum = 0.0;
    for (double v : ch) sum += v;
    const double mu = sum / n;
    double var = 0.0;
    for (double v : ch) var += (v - mu) * (v - mu);
    s.mean[c] = mu;
    s.std[c] = std::sqrt(var / n + ChannelStats::eps);
  }
  return s;
}

/// Mean squared difference over all elements.
inline double content_loss(const FeatureMap& out, const FeatureMap& ref) {
  if (!out.same_shape(ref)) throw Error(ErrorCode::ShapeMismatch, "content_loss on different shapes");
  double sum = 0.0;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double d = out.values[i] - ref.values[i];
    sum += d * d;
  }
  return sum / static_cast<double>(out.values.size());
}

/// Per-layer statistics keyed by layer name.
using LayerStats = std::map<std::string, ChannelStats>;

inline const std::array<std::string, 4>& style_layers() {
  static const std::array<std::string, 4> layers = {"relu1_1", "relu2_1", "relu3_1", "relu4_1"};
  return layers;
}

inline constexpr const char* kContentLayer = "relu4_2";

/// Sum over layers of ||mu - mu_target||^2 + ||sigma - sigma_target||^2.
inline double style_stats_loss(const LayerStats& out, const LayerStats& targets) {
  if (out.size() != targets.size()) throw Error(ErrorCode::LayerSetMismatch, "different layer counts");
  double total = 0.0;
  for (const auto& [layer, o] : out) {
    const auto it = targets.find(layer);
    if (it == targets.end()) throw Error(ErrorCode::LayerSetMismatch, "no target for layer " + layer);
    const ChannelStats& t = it->second;
    if (o.mean.size() != t.mean.size() || o.std.size() != t.std.size() || o.mean.size() != o.std.size())
      throw Error(ErrorCode::ChannelMismatch, "layer " + layer);
    for (std::size_t c = 0; c < o.mean.size(); ++c) {
      const double dm = o.mean[c] - t.mean[c];
      const double ds = o.std[c] - t.std[c];
      total += dm * dm + ds * ds;
    }
  }
  return total;
}

/// Precomputed style statistics for any number of style ids, each holding
/// exactly the four style layers.
class StyleTargets {
 public:
  void add(int style_id, LayerStats stats) {
    if (stats.size() != style_layers().size())
      throw Error(ErrorCode::LayerSetMismatch, "style targets need exactly the four style layers");
    for (const auto& layer : style_layers())
      if (!stats.contains(layer)) throw Error(ErrorCode::LayerSetMismatch, "missing style layer " + layer);
    targets_[style_id] = std::move(stats);
  }

  /// Statistics of the style image's features at each style layer.
  void add_from_features(int style_id, const std::map<std::string, FeatureMap>& features) {
    LayerStats stats;
    for (const auto& [layer, f] : features) stats[layer] = channel_stats(f);
    add(style_id, std::move(stats));
  }

  const LayerStats& at(int style_id) const {
    const auto it = targets_.find(style_id);
    if (it == targets_.end()) throw Error(ErrorCode::IndexOutOfRange, "unknown style id " + std::to_string(style_id));
    return it->second;
  }

  std::size_t size() const { return targets_.size(); }

 private:
  std::map<int, LayerStats> targets_;
};

/// Style loss against the targets of the active style id.
inline double style_stats_loss(const LayerStats& out, const StyleTargets& targets, int style_id) {
  return style_stats_loss(out, targets.at(style_id));
}

/// clip((I - mu_c) * sigma_s / sigma_c + mu_s) per channel.
inline ImageBuf color_transfer(const ImageBuf& img, const ChannelStats& content, const ChannelStats& style) {
  if (content.channels() != 3 || style.channels() != 3)
    throw Error(ErrorCode::WrongChannelCount, "color transfer needs 3-channel statistics");
  for (double s : content.std)
    if (!(s >= 1e-8)) throw Error(ErrorCode::ZeroContentStd, "content channel std below 1e-8");
  ImageBuf out = img;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = (img.values[i * 3 + c] - content.mean[c]) * (style.std[c] / content.std[c]) + style.mean[c];
      out.values[i * 3 + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

/// Per-channel statistics pooled over every pixel of every image.
inline ChannelStats color_stats(std::span<const ImageBuf> images) {
  std::size_t pixels = 0;
  for (const auto& img : images) pixels += img.pixel_count();
  if (pixels == 0) throw Error(ErrorCode::EmptySet, "color statistics of no pixels");
  FeatureMap pooled(3, 1, pixels);
  std::size_t offset = 0;
  for (const auto& img : images) {
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
      for (std::size_t c = 0; c < 3; ++c) pooled.values[c * pixels + offset + i] = img.values[i * 3 + c];
    offset += img.pixel_count();
  }
  return channel_stats(pooled);
}

inline constexpr double kDepthEps = 1e-6;

/// (D - mean) / sqrt(var + 1e-6) over all pixels of a single-channel map.
inline FeatureMap depth_normalize(const FeatureMap& d) {
  if (d.channels != 1) throw Error(ErrorCode::WrongChannelCount, "depth map must have one channel");
  if (d.plane() < 2) throw Error(ErrorCode::TooFewPixels, "depth normalization needs at least 2 pixels");
  const double n = static_cast<double>(d.values.size());
  double sum = 0.0;
  for (double v : d.values) sum += v;
  const double mu = sum / n;
  double var = 0.0;
  for (double v : d.values) var += (v - mu) * (v - mu);
  const double denom = std::sqrt(var / n + kDepthEps);
  FeatureMap out = d;
  for (double& v : out.values) v = (v - mu) / denom;
  return out;
}

/// Smooth L1 with transition at |x| = 1.
inline double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

/// Mean smooth-L1 of a - b.
inline double smooth_l1_loss(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "smooth_l1_loss on different shapes");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) sum += smooth_l1(a.values[i] - b.values[i]);
  return sum / static_cast<double>(a.values.size());
}

inline double depth_loss(const FeatureMap& d_sty, const FeatureMap& d_ref) {
  if (!d_sty.same_shape(d_ref)) throw Error(ErrorCode::ShapeMismatch, "depth_loss on different shapes");
  return smooth_l1_loss(depth_normalize(d_sty), depth_normalize(d_ref));
}

/// Depth loss averaged over a batch of (stylized, reference) depth pairs.
inline double depth_loss_batch(std::span<const std::pair<FeatureMap, FeatureMap>> batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptySet, "depth loss over an empty batch");
  double sum = 0.0;
  for (const auto& [sty, ref] : batch) sum += depth_loss(sty, ref);
  return sum / static_cast<double>(batch.size());
}

/// Keypoints, detection scores and descriptors of one image.
struct FeatureSet {
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> keypoints;
  Eigen::VectorXd scores;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> descriptors;

  Eigen::Index count() const { return descriptors.rows(); }

  void validate() const {
    if (keypoints.rows() != descriptors.rows() || scores.size() != descriptors.rows())
      throw Error(ErrorCode::ShapeMismatch, "keypoints, scores and descriptors disagree on K");
  }
};

struct Match {
  std::size_t anchor;
  std::size_t target;
  double confidence;
};

using MatchSet = std::vector<Match>;

inline constexpr double kDefaultTau = 0.2;
inline constexpr double kDefaultDelta = 0.5;
inline constexpr double kDefaultLambdaSal = 0.1;

/// Huber penalty: x^2 / 2 inside |x| <= delta, delta (|x| - delta / 2) outside.
inline double huber(double x, double delta) {
  const double a = std::abs(x);
  return a <= delta ? 0.5 * x * x : delta * (a - 0.5 * delta);
}

namespace detail {

inline void check_matches(const MatchSet& matches, std::size_t anchor_count, std::optional<std::size_t> target_count) {
  std::unordered_set<std::size_t> seen;
  for (const auto& m : matches) {
    if (m.anchor >= anchor_count) throw Error(ErrorCode::IndexOutOfRange, "anchor index " + std::to_string(m.anchor));
    if (target_count && m.target >= *target_count)
      throw Error(ErrorCode::IndexOutOfRange, "target index " + std::to_string(m.target));
    if (!(m.confidence >= 0.0 && m.confidence <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "match confidence outside [0, 1]");
    if (!seen.insert(m.anchor).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate anchor index " + std::to_string(m.anchor));
  }
}

inline void check_tau(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tau must lie in [0, 1]");
}

}  // namespace detail

/// Matches whose confidence reaches tau.
inline std::size_t kept_match_count(const MatchSet& matches, double tau) {
  return static_cast<std::size_t>(
      std::count_if(matches.begin(), matches.end(), [tau](const Match& m) { return m.confidence >= tau; }));
}

/// Mean Huber-penalized cosine distance over confident matches; zero when no
/// match reaches tau.
inline double descriptor_pair_loss(const FeatureSet& anchor, const FeatureSet& target, const MatchSet& matches,
                                   double tau = kDefaultTau, double delta = kDefaultDelta) {
  anchor.validate();
  target.validate();
  detail::check_tau(tau);
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  if (anchor.descriptors.cols() != target.descriptors.cols())
    throw Error(ErrorCode::DescriptorDimMismatch, "anchor and target descriptor dimensions differ");
  detail::check_matches(matches, static_cast<std::size_t>(anchor.count()), static_cast<std::size_t>(target.count()));

  double sum = 0.0;
  std::size_t kept = 0;
  for (const auto& m : matches) {
    if (m.confidence < tau) continue;
    const auto fa = anchor.descriptors.row(static_cast<Eigen::Index>(m.anchor));
    const auto fb = target.descriptors.row(static_cast<Eigen::Index>(m.target));
    const double na = fa.norm(), nb = fb.norm();
    if (na < 1e-12 || nb < 1e-12) throw Error(ErrorCode::ZeroDescriptor, "descriptor norm below 1e-12");
    const double cosine_distance = 1.0 - (fa / na).dot(fb / nb);
    sum += huber(cosine_distance, delta);
    ++kept;
  }
  return kept == 0 ? 0.0 : sum / static_cast<double>(kept);
}

/// Mean (1 - s)^2 over confident matches' anchor scores; zero when none.
inline double saliency_loss(std::span<const double> anchor_scores, const MatchSet& matches, double tau = kDefaultTau) {
  detail::check_tau(tau);
  detail::check_matches(matches, anchor_scores.size(), std::nullopt);
  double sum = 0.0;
  std::size_t kept = 0;
  for (const auto& m : matches) {
    if (m.confidence < tau) continue;
    const double miss = 1.0 - anchor_scores[m.anchor];
    sum += miss * miss;
    ++kept;
  }
  return kept == 0 ? 0.0 : sum / static_cast<double>(kept);
}

inline double saliency_loss(const Eigen::VectorXd& anchor_scores, const MatchSet& matches, double tau = kDefaultTau) {
  return saliency_loss(std::span<const double>(anchor_scores.data(), static_cast<std::size_t>(anchor_scores.size())),
                       matches, tau);
}

/// Sum over the other views of descriptor loss + lambda_sal * saliency loss.
inline double anchor_loss(const FeatureSet& anchor, std::span<const FeatureSet> targets,
                          std::span<const MatchSet> matches, double tau = kDefaultTau, double delta = kDefaultDelta,
                          double lambda_sal = kDefaultLambdaSal) {
  if (targets.size() != matches.size())
    throw Error(ErrorCode::LengthMismatch, "one match set is needed per target view");
  double total = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j)
    total += descriptor_pair_loss(anchor, targets[j], matches[j], tau, delta) +
             lambda_sal * saliency_loss(anchor.scores, matches[j], tau);
  return total;
}

/// Dataset-level correspondence loss: anchor_loss summed over every anchor.
/// stylized[a] holds the anchor features of view a, cached[j] the original
/// view features and matches[a][j] the a -> j matches (diagonal ignored).
inline double dataset_sg_loss(std::span<const FeatureSet> stylized, std::span<const FeatureSet> cached,
                              const std::vector<std::vector<MatchSet>>& matches, double tau = kDefaultTau,
                              double delta = kDefaultDelta, double lambda_sal = kDefaultLambdaSal) {
  const std::size_t n = stylized.size();
  if (cached.size() != n || matches.size() != n) throw Error(ErrorCode::LengthMismatch, "view counts disagree");
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (matches[a].size() != n) throw Error(ErrorCode::LengthMismatch, "match table row " + std::to_string(a));
    std::vector<FeatureSet> targets;
    std::vector<MatchSet> pair_matches;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      targets.push_back(cached[j]);
      pair_matches.push_back(matches[a][j]);
    }
    total += anchor_loss(stylized[a], targets, pair_matches, tau, delta, lambda_sal);
  }
  return total;
}

/// Warmup-then-linear-ramp weight schedule.
struct Schedule {
  double t0 = 200.0;
  double tr = 400.0;
  double wmax = 1.0;

  void validate() const {
    if (!(t0 >= 0.0) || !(tr >= 1.0) || !(wmax >= 0.0))
      throw Error(ErrorCode::InvalidArgument, "schedule needs t0 >= 0, tr >= 1, wmax >= 0");
  }
};

inline constexpr Schedule kSgSchedule{200.0, 400.0, 1.0};
inline constexpr Schedule kDepthSchedule{200.0, 400.0, 0.1};

inline double schedule_weight(double t, const Schedule& sch) {
  sch.validate();
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "iteration must be non-negative");
  if (t <= sch.t0) return 0.0;
  if (t <= sch.t0 + sch.tr) return sch.wmax * (t - sch.t0) / sch.tr;
  return sch.wmax;
}

/// Raw loss values entering the objective. rgb and tv are the optional
/// photometric and total-variation terms.
struct LossParts {
  double content = 0.0;
  double style = 0.0;
  double sg = 0.0;
  double depth = 0.0;
  std::optional<double> rgb;
  std::optional<double> tv;
};

struct ObjectiveWeights {
  double content = 1.0;
  double style = 6.0;
  double rgb = 0.0;
  double tv = 1e-5;
  Schedule sg = kSgSchedule;
  Schedule depth = kDepthSchedule;
};

struct LossBreakdown {
  LossParts parts;
  double t = 0.0;
  double lambda_content = 0.0, lambda_style = 0.0, lambda_sg = 0.0, lambda_depth = 0.0;
  double lambda_rgb = 0.0, lambda_tv = 0.0;
  double total = 0.0;
};

inline double total_of(const LossBreakdown& b) {
  double total = b.lambda_content * b.parts.content + b.lambda_style * b.parts.style + b.lambda_sg * b.parts.sg +
                 b.lambda_depth * b.parts.depth;
  if (b.parts.rgb) total += b.lambda_rgb * *b.parts.rgb;
  if (b.parts.tv) total += b.lambda_tv * *b.parts.tv;
  return total;
}

inline LossBreakdown total_objective(const LossParts& parts, double t, const ObjectiveWeights& w = {}) {
  for (double v : {parts.content, parts.style, parts.sg, parts.depth, parts.rgb.value_or(0.0), parts.tv.value_or(0.0)})
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "loss part is not finite");
  LossBreakdown b;
  b.parts = parts;
  b.t = t;
  b.lambda_content = w.content;
  b.lambda_style = w.style;
  b.lambda_sg = schedule_weight(t, w.sg);
  b.lambda_depth = schedule_weight(t, w.depth);
  b.lambda_rgb = w.rgb;
  b.lambda_tv = w.tv;
  b.total = total_of(b);
  return b;
}

/// Mean squared RGB difference.
inline double rgb_loss(const ImageBuf& a, const ImageBuf& b) {
  if (a.height != b.height || a.width != b.width) throw Error(ErrorCode::ShapeMismatch, "rgb_loss on different sizes");
  if (a.empty()) throw Error(ErrorCode::EmptyImage, "rgb_loss of empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.values.size());
}

/// Anisotropic total variation: mean |forward x-difference| plus mean
/// |forward y-difference|, over all channels.
inline double tv_loss(const ImageBuf& img) {
  if (img.empty()) throw Error(ErrorCode::EmptyImage, "tv_loss of empty image");
  double dx = 0.0, dy = 0.0;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        if (x + 1 < img.width) dx += std::abs(img.at(y, x + 1, c) - img.at(y, x, c));
        if (y + 1 < img.height) dy += std::abs(img.at(y + 1, x, c) - img.at(y, x, c));
      }
  const double nx = static_cast<double>((img.width - 1) * img.height * 3);
  const double ny = static_cast<double>(img.width * (img.height - 1) * 3);
  return (nx > 0 ? dx / nx : 0.0) + (ny > 0 ? dy / ny : 0.0);
}

}  // namespace mvgeom
