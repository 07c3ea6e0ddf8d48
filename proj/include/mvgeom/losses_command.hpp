#pragma once

// `mvgeom losses`: evaluates the training objective on arrays named by a JSON
// spec. Paths in the spec resolve relative to the spec file.
//
// {
//   "tau": 0.2, "delta": 0.5, "lambda_sal": 0.1,
//   "weights":   {"content": 1.0, "style": 6.0, "rgb": 0.0, "tv": 1e-5},
//   "schedules": {"sg": {"t0": 200, "tr": 400, "wmax": 1.0},
//                 "depth": {"t0": 200, "tr": 400, "wmax": 0.1}},
//   "entries": [{
//     "name": "view_000", "iteration": 1000,
//     "content": {"output": "c_out.npy", "reference": "c_ref.npy"},          C x H x W
//     "style":   {"output":  {"relu1_1": "o1.npy", ...},                      C x H x W per layer
//                 "targets": {"relu1_1": "s1.npy", ...}}                      or "target_stats": 2 x C
//     "depth":   {"stylized": "d_sty.npy", "reference": "d_ref.npy"},        H x W
//     "sg": {"anchor": {"keypoints": "k.npy", "scores": "s.npy", "descriptors": "f.npy"},
//            "targets": [{"keypoints": ..., "scores": ..., "descriptors": ..., "matches": "m.npy"}]},
//     "rgb": {"output": "a.png", "reference": "b.png"},
//     "tv":  {"image": "a.png"}
//   }]
// }
//
// Match arrays are M x 3 rows of (anchor index, target index, confidence).
// Every part is optional; absent content/style/sg/depth terms count as 0.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mvgeom/commands.hpp"
#include "mvgeom/loss_kernels.hpp"

namespace mvgeom {

namespace detail {

inline FeatureMap feature_map_from_array(const ArrayFile& a, const std::string& what) {
  if (a.shape.size() == 3) return FeatureMap(a.shape[0], a.shape[1], a.shape[2], a.to_f64());
  if (a.shape.size() == 2) return FeatureMap(1, a.shape[0], a.shape[1], a.to_f64());
  throw Error(ErrorCode::ShapeMismatch, what + ": feature maps must be C x H x W or H x W");
}

inline RowMatrix matrix_from_array(const ArrayFile& a, const std::string& what, Eigen::Index cols = -1) {
  const auto values = a.to_f64();
  if (a.shape.size() == 1 && cols <= 1)
    return Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(a.shape[0]), 1);
  if (a.shape.size() != 2 || (cols > 0 && a.shape[1] != static_cast<std::size_t>(cols)))
    throw Error(ErrorCode::ShapeMismatch, what + ": unexpected array shape");
  return Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(a.shape[0]),
                                     static_cast<Eigen::Index>(a.shape[1]));
}

class SpecReader {
 public:
  explicit SpecReader(fs::path base) : base_(std::move(base)) {}

  fs::path path(const Report& node, const char* key) const {
    if (!node.contains(key) || !node[key].is_string())
      throw Error(ErrorCode::InvalidArgument, std::string("spec field '") + key + "' must be a path string");
    fs::path p = node[key].get<std::string>();
    return p.is_absolute() ? p : base_ / p;
  }

  ArrayFile array(const Report& node, const char* key) const { return read_array(path(node, key)); }

  FeatureMap feature_map(const Report& node, const char* key) const {
    const fs::path p = path(node, key);
    return feature_map_from_array(read_array(p), p.string());
  }

  FeatureSet feature_set(const Report& node) const {
    FeatureSet f;
    f.keypoints = matrix_from_array(array(node, "keypoints"), "keypoints", 2);
    const RowMatrix scores = matrix_from_array(array(node, "scores"), "scores", 1);
    f.scores = Eigen::Map<const Eigen::VectorXd>(scores.data(), scores.size());
    f.descriptors = matrix_from_array(array(node, "descriptors"), "descriptors");
    f.validate();
    return f;
  }

  MatchSet matches(const Report& node) const {
    const RowMatrix m = matrix_from_array(array(node, "matches"), "matches", 3);
    MatchSet out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (m(i, 0) < 0 || m(i, 1) < 0 || m(i, 0) != std::floor(m(i, 0)) || m(i, 1) != std::floor(m(i, 1)))
        throw Error(ErrorCode::IndexOutOfRange, "match indices must be non-negative integers");
      out.push_back({static_cast<std::size_t>(m(i, 0)), static_cast<std::size_t>(m(i, 1)), m(i, 2)});
    }
    return out;
  }

  LayerStats layer_stats(const Report& node) const {
    LayerStats stats;
    for (auto it = node.begin(); it != node.end(); ++it)
      stats[it.key()] = channel_stats(feature_map(node, it.key().c_str()));
    return stats;
  }

  /// 2 x C arrays: row 0 means, row 1 standard deviations.
  LayerStats raw_stats(const Report& node) const {
    LayerStats stats;
    for (auto it = node.begin(); it != node.end(); ++it) {
      const RowMatrix m = matrix_from_array(array(node, it.key().c_str()), it.key());
      if (m.rows() != 2) throw Error(ErrorCode::ShapeMismatch, it.key() + ": target stats must be 2 x C");
      ChannelStats s;
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        s.mean.push_back(m(0, c));
        s.std.push_back(m(1, c));
      }
      stats[it.key()] = std::move(s);
    }
    return stats;
  }

 private:
  fs::path base_;
};

inline Schedule schedule_from(const Report& node, Schedule fallback) {
  Schedule s = fallback;
  s.t0 = node.value("t0", s.t0);
  s.tr = node.value("tr", s.tr);
  s.wmax = node.value("wmax", s.wmax);
  s.validate();
  return s;
}

inline Report schedule_json(const Schedule& s) { return {{"t0", s.t0}, {"tr", s.tr}, {"wmax", s.wmax}}; }

}  // namespace detail

inline Report losses_command(const fs::path& spec_path) {
  const Report spec = read_report(spec_path);
  const detail::SpecReader reader(spec_path.parent_path());

  const double tau = spec.value("tau", kDefaultTau);
  const double delta = spec.value("delta", kDefaultDelta);
  const double lambda_sal = spec.value("lambda_sal", kDefaultLambdaSal);
  ObjectiveWeights w;
  if (spec.contains("weights")) {
    const auto& wj = spec["weights"];
    w.content = wj.value("content", w.content);
    w.style = wj.value("style", w.style);
    w.rgb = wj.value("rgb", w.rgb);
    w.tv = wj.value("tv", w.tv);
  }
  if (spec.contains("schedules")) {
    const auto& sj = spec["schedules"];
    if (sj.contains("sg")) w.sg = detail::schedule_from(sj["sg"], w.sg);
    if (sj.contains("depth")) w.depth = detail::schedule_from(sj["depth"], w.depth);
  }
  if (!spec.contains("entries") || !spec["entries"].is_array())
    throw Error(ErrorCode::InvalidArgument, spec_path.string() + ": 'entries' array is required");

  Report entries = Report::array();
  for (const auto& e : spec["entries"]) {
    LossParts parts;
    if (e.contains("content"))
      parts.content =
          content_loss(reader.feature_map(e["content"], "output"), reader.feature_map(e["content"], "reference"));
    if (e.contains("style")) {
      const auto& sj = e["style"];
      if (!sj.contains("output")) throw Error(ErrorCode::InvalidArgument, "style.output is required");
      const LayerStats out = reader.layer_stats(sj["output"]);
      LayerStats targets;
      if (sj.contains("targets"))
        targets = reader.layer_stats(sj["targets"]);
      else if (sj.contains("target_stats"))
        targets = reader.raw_stats(sj["target_stats"]);
      else
        throw Error(ErrorCode::InvalidArgument, "style needs 'targets' or 'target_stats'");
      parts.style = style_stats_loss(out, targets);
    }
    if (e.contains("depth"))
      parts.depth =
          depth_loss(reader.feature_map(e["depth"], "stylized"), reader.feature_map(e["depth"], "reference"));
    if (e.contains("sg")) {
      const auto& g = e["sg"];
      const FeatureSet anchor = reader.feature_set(g.at("anchor"));
      std::vector<FeatureSet> targets;
      std::vector<MatchSet> matches;
      for (const auto& t : g.at("targets")) {
        targets.push_back(reader.feature_set(t));
        matches.push_back(reader.matches(t));
      }
      parts.sg = anchor_loss(anchor, targets, matches, tau, delta, lambda_sal);
    }
    if (e.contains("rgb"))
      parts.rgb = rgb_loss(read_image(reader.path(e["rgb"], "output")), read_image(reader.path(e["rgb"], "reference")));
    if (e.contains("tv")) parts.tv = tv_loss(read_image(reader.path(e["tv"], "image")));

    const LossBreakdown b = total_objective(parts, e.value("iteration", 0.0), w);
    Report part_json = {{"content", parts.content}, {"style", parts.style}, {"sg", parts.sg}, {"depth", parts.depth}};
    if (parts.rgb) part_json["rgb"] = *parts.rgb;
    if (parts.tv) part_json["tv"] = *parts.tv;
    entries.push_back({{"name", e.value("name", std::string{})},
                       {"iteration", b.t},
                       {"parts", part_json},
                       {"weights",
                        {{"content", b.lambda_content},
                         {"style", b.lambda_style},
                         {"sg", b.lambda_sg},
                         {"depth", b.lambda_depth},
                         {"rgb", b.lambda_rgb},
                         {"tv", b.lambda_tv}}},
                       {"total", b.total}});
  }

  Report r;
  r["command"] = "losses";
  r["version"] = kVersion;
  r["config"] = {{"spec", spec_path.string()},
                 {"tau", tau},
                 {"delta", delta},
                 {"lambda_sal", lambda_sal},
                 {"weights", {{"content", w.content}, {"style", w.style}, {"rgb", w.rgb}, {"tv", w.tv}}},
                 {"schedules", {{"sg", detail::schedule_json(w.sg)}, {"depth", detail::schedule_json(w.depth)}}}};
  r["entries"] = entries;
  return r;
}

}  // namespace mvgeom
