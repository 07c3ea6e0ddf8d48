#pragma once

// Subcommand implementations behind the mvgeom CLI. Each returns the JSON
// report it would write, so the same code paths are testable in-process.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvgeom/cloud.hpp"
#include "mvgeom/error.hpp"
#include "mvgeom/image.hpp"
#include "mvgeom/loss_kernels.hpp"
#include "mvgeom/npy.hpp"
#include "mvgeom/parallel.hpp"
#include "mvgeom/report.hpp"
#include "mvgeom/structure_metrics.hpp"
#include "mvgeom/style_metrics.hpp"
#include "mvgeom/trajectory.hpp"
#include "mvgeom/trajectory_io.hpp"

namespace mvgeom {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Regular files in dir whose lowercase extension is listed, sorted by name.
inline std::vector<fs::path> list_files(const fs::path& dir, std::initializer_list<std::string_view> extensions) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower(entry.path().extension().string());
    if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return out;
}

inline double parse_number(std::string_view s, const std::string& what) {
  double v;
  if (!parse_double(s, v)) throw Error(ErrorCode::InvalidArgument, what + ": '" + std::string(s) + "' is not a number");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) return out;
    s.remove_prefix(pos + 1);
  }
}

inline Report transform_json(const SimilarityTransform& xf) {
  Report r;
  r["s"] = xf.s;
  Report rot = Report::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rot.push_back(xf.r(i, j));
  r["R"] = rot;
  r["t"] = {xf.t.x(), xf.t.y(), xf.t.z()};
  return r;
}

}  // namespace detail

/// "WxH" applies the 0.7 W focal rule; "fx,fy,cx,cy" is taken verbatim.
/// An empty spec means "derive from the image size" and yields nullopt.
inline std::optional<Intrinsics> parse_intrinsics(std::string_view spec) {
  if (spec.empty()) return std::nullopt;
  const auto parts = detail::split(spec, ',');
  if (parts.size() == 4)
    return Intrinsics(detail::parse_number(parts[0], "fx"), detail::parse_number(parts[1], "fy"),
                      detail::parse_number(parts[2], "cx"), detail::parse_number(parts[3], "cy"));
  const auto x = spec.find_first_of("xX");
  if (x != std::string_view::npos) {
    const double w = detail::parse_number(spec.substr(0, x), "width");
    const double h = detail::parse_number(spec.substr(x + 1), "height");
    if (w < 1 || h < 1 || w != std::floor(w) || h != std::floor(h))
      throw Error(ErrorCode::ZeroDimension, "intrinsics size must be positive integers");
    return intrinsics_from_rule(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
  }
  throw Error(ErrorCode::InvalidArgument, "intrinsics must be 'WxH' or 'fx,fy,cx,cy'");
}

/// Selects indices from [0, count): "all", or a comma list of indices and
/// inclusive ranges such as "0,2,5-9".
inline std::vector<std::size_t> parse_frame_selector(std::string_view spec, std::size_t count) {
  std::vector<std::size_t> out;
  if (spec.empty() || spec == "all") {
    for (std::size_t i = 0; i < count; ++i) out.push_back(i);
    return out;
  }
  auto index = [&](std::string_view s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw Error(ErrorCode::InvalidArgument, "bad frame index '" + std::string(s) + "'");
    if (v >= count) throw Error(ErrorCode::IndexOutOfRange, "frame index " + std::to_string(v));
    return v;
  };
  for (auto item : detail::split(spec, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(index(item));
    } else {
      const std::size_t lo = index(item.substr(0, dash)), hi = index(item.substr(dash + 1));
      if (hi < lo) throw Error(ErrorCode::InvalidArgument, "descending frame range");
      for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// chd

struct ChdConfig {
  fs::path stylized_dir;
  fs::path style_image;
  std::size_t bins = kDefaultBins;
  unsigned threads = 1;
};

inline Report chd_command(const ChdConfig& cfg) {
  const auto files = detail::list_files(cfg.stylized_dir, {".png", ".jpg", ".jpeg"});
  if (files.empty()) throw Error(ErrorCode::EmptySet, cfg.stylized_dir.string() + " holds no images");
  const ImageBuf style = read_image(cfg.style_image);
  std::vector<ImageBuf> images;
  for (const auto& f : files) images.push_back(read_image(f));

  const auto values = chd_per_image(images, style, cfg.bins, cfg.threads);
  Report per_image = Report::array();
  double sum = 0.0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    per_image.push_back({{"name", files[i].filename().string()}, {"chd", values[i]}});
    sum += values[i];
  }

  Report r;
  r["command"] = "chd";
  r["version"] = kVersion;
  r["config"] = {{"stylized_dir", cfg.stylized_dir.string()},
                 {"style_image", cfg.style_image.string()},
                 {"bins", cfg.bins}};
  r["per_image"] = per_image;
  r["chd_mean"] = sum / static_cast<double>(files.size());
  return r;
}

// ---------------------------------------------------------------------------
// dsd

struct DsdConfig {
  fs::path content_dir;
  fs::path stylized_dir;
  unsigned threads = 1;
};

inline Report dsd_command(const DsdConfig& cfg) {
  const auto files = detail::list_files(cfg.content_dir, {".npy"});
  if (files.empty()) throw Error(ErrorCode::EmptySet, cfg.content_dir.string() + " holds no token files");

  DsdOptions opts;
  opts.threads = cfg.threads;
  Report per_image = Report::array();
  double sum = 0.0;
  for (const auto& f : files) {
    const fs::path partner = cfg.stylized_dir / f.filename();
    if (!fs::exists(partner)) throw Error(ErrorCode::MissingFile, partner.string() + " (no stylized tokens for pair)");
    const TokenMatrix content = TokenMatrix::from_array(read_array(f), f.string());
    const TokenMatrix stylized = TokenMatrix::from_array(read_array(partner), partner.string());
    const double v = dsd(content, stylized, opts);
    per_image.push_back({{"name", f.filename().string()}, {"dsd", v}, {"tokens", content.count()}});
    sum += v;
  }

  Report r;
  r["command"] = "dsd";
  r["version"] = kVersion;
  r["config"] = {{"content_tokens", cfg.content_dir.string()}, {"stylized_tokens", cfg.stylized_dir.string()}};
  r["per_image"] = per_image;
  r["dsd_mean"] = sum / static_cast<double>(files.size());
  return r;
}

// ---------------------------------------------------------------------------
// traj

enum class RteStat { Mean, Median };

struct TrajConfig {
  fs::path ref;
  fs::path est;
  double max_dt = kDefaultMaxDt;
  RteStat rte_stat = RteStat::Mean;
};

struct TrajResult {
  PairedRuns runs;
  SimilarityTransform xf;
  double ate = 0.0;
  std::vector<double> residuals;
  RteSummary rte;
};

inline TrajResult evaluate_trajectories(const Trajectory& ref, const Trajectory& est, double max_dt) {
  TrajResult out;
  out.runs = associate(ref, est, max_dt);
  out.xf = umeyama(out.runs);
  out.ate = ate_rmse(out.runs.ref_centers, out.runs.est_centers, out.xf);
  out.residuals = ate_residuals(out.runs.ref_centers, out.runs.est_centers, out.xf);
  out.rte = rte(out.runs.ref_rotations, out.runs.est_rotations, out.xf.r);
  return out;
}

inline Report trajectory_json(const TrajResult& res, RteStat stat) {
  Report per_frame = Report::array();
  for (std::size_t i = 0; i < res.runs.size(); ++i)
    per_frame.push_back({{"frame_id", res.runs.frame_ids[i]},
                         {"ate_residual", res.residuals[i]},
                         {"rte_deg", res.rte.per_frame_deg[i]}});
  Report r;
  r["alignment"] = detail::transform_json(res.xf);
  r["pairs"] = res.runs.size();
  r["ate_rmse"] = res.ate;
  r["rte_mean_deg"] = res.rte.mean_deg;
  r["rte_median_deg"] = res.rte.median_deg;
  r["rte_deg"] = stat == RteStat::Mean ? res.rte.mean_deg : res.rte.median_deg;
  r["per_frame"] = per_frame;
  return r;
}

inline Report traj_command(const TrajConfig& cfg) {
  const auto res = evaluate_trajectories(parse_trajectory(cfg.ref), parse_trajectory(cfg.est), cfg.max_dt);
  Report r = trajectory_json(res, cfg.rte_stat);
  r["command"] = "traj";
  r["version"] = kVersion;
  r["config"] = {{"ref", cfg.ref.string()},
                 {"est", cfg.est.string()},
                 {"max_dt", cfg.max_dt},
                 {"rte_stat", cfg.rte_stat == RteStat::Mean ? "mean" : "median"}};
  return r;
}

// ---------------------------------------------------------------------------
// chamfer

enum class PoseSource { Est, Ref };

struct ChamferConfig {
  fs::path ref_disp;
  fs::path est_disp;
  fs::path ref_traj;
  fs::path est_traj;
  std::string intrinsics;  // "", "WxH" or "fx,fy,cx,cy"
  std::size_t stride = kDefaultStride;
  double min_disp = kDefaultMinDisparity;
  double max_dt = kDefaultMaxDt;
  std::string frames = "all";
  PoseSource pose_source = PoseSource::Est;
  unsigned threads = 1;
};

/// Pose whose timestamp is nearest to t, within max_dt.
inline const TimedPose& pose_at(const Trajectory& traj, double t, double max_dt, const std::string& what) {
  const TimedPose* best = nullptr;
  for (const auto& p : traj.poses)
    if (!best || std::abs(p.timestamp - t) < std::abs(best->timestamp - t)) best = &p;
  if (!best || std::abs(best->timestamp - t) > max_dt)
    throw Error(ErrorCode::InvalidArgument, "no pose within max_dt of frame " + what);
  return *best;
}

struct ChamferResult {
  SimilarityTransform xf;
  Intrinsics k;
  std::size_t frames = 0;
  std::size_t ref_points = 0;
  std::size_t est_points = 0;
  double chamfer = 0.0;
};

/// Back-projects the selected frames of both runs, aligns the estimated cloud
/// with the trajectory similarity and returns the symmetric Chamfer distance.
/// Disparity files are paired by filename; each stem is the frame timestamp.
inline ChamferResult evaluate_chamfer(const ChamferConfig& cfg, const Trajectory& ref, const Trajectory& est,
                                      const SimilarityTransform& xf) {
  const auto files = detail::list_files(cfg.ref_disp, {".npy"});
  if (files.empty()) throw Error(ErrorCode::EmptySet, cfg.ref_disp.string() + " holds no disparity files");
  const auto selected = parse_frame_selector(cfg.frames, files.size());
  const auto fixed_k = parse_intrinsics(cfg.intrinsics);
  const SimilarityTransform inv = xf.inverse();

  ChamferResult res;
  res.xf = xf;
  PointCloud p, q_hat;
  for (std::size_t idx : selected) {
    const fs::path ref_file = files[idx];
    const fs::path est_file = cfg.est_disp / ref_file.filename();
    if (!fs::exists(est_file)) throw Error(ErrorCode::MissingFile, est_file.string() + " (no estimated disparity)");
    const std::string stem = ref_file.stem().string();
    const double t = detail::parse_number(stem, "disparity filename timestamp");

    const DisparityMap d_ref = DisparityMap::from_array(read_array(ref_file));
    const DisparityMap d_est = DisparityMap::from_array(read_array(est_file));
    const Intrinsics k = fixed_k ? *fixed_k : intrinsics_from_rule(d_ref.width, d_ref.height);
    res.k = k;

    const TimedPose& ref_pose = pose_at(ref, t, cfg.max_dt, stem);
    auto frame_p = backproject(d_ref, k, ref_pose, cfg.stride, cfg.min_disp);
    p.points.insert(p.points.end(), frame_p.points.begin(), frame_p.points.end());

    Mat3 r_est;
    Vec3 c_est;
    if (cfg.pose_source == PoseSource::Est) {
      const TimedPose& est_pose = pose_at(est, t, cfg.max_dt, stem);
      r_est = est_pose.rotation();
      c_est = est_pose.position;
    } else {
      // Reference pose expressed in the estimated run's frame.
      r_est = xf.r.transpose() * ref_pose.rotation();
      c_est = inv.apply(ref_pose.position);
    }
    auto frame_q = backproject(d_est, k, r_est, c_est, cfg.stride, cfg.min_disp);
    q_hat.points.insert(q_hat.points.end(), frame_q.points.begin(), frame_q.points.end());
    ++res.frames;
  }

  const PointCloud q = apply_similarity(q_hat, xf);
  ChamferOptions opts;
  opts.threads = cfg.threads;
  res.chamfer = chamfer(p, q, opts);
  res.ref_points = p.size();
  res.est_points = q.size();
  return res;
}

inline Report chamfer_json(const ChamferResult& res) {
  Report r;
  r["chamfer"] = res.chamfer;
  r["frames"] = res.frames;
  r["ref_points"] = res.ref_points;
  r["est_points"] = res.est_points;
  r["alignment"] = detail::transform_json(res.xf);
  r["intrinsics"] = {{"fx", res.k.fx}, {"fy", res.k.fy}, {"cx", res.k.cx}, {"cy", res.k.cy}};
  return r;
}

inline Report chamfer_config_json(const ChamferConfig& cfg) {
  return {{"ref_disp", cfg.ref_disp.string()},
          {"est_disp", cfg.est_disp.string()},
          {"ref_traj", cfg.ref_traj.string()},
          {"est_traj", cfg.est_traj.string()},
          {"intrinsics", cfg.intrinsics.empty() ? "rule" : cfg.intrinsics},
          {"stride", cfg.stride},
          {"min_disp", cfg.min_disp},
          {"max_dt", cfg.max_dt},
          {"frames", cfg.frames},
          {"pose_source", cfg.pose_source == PoseSource::Est ? "est" : "ref"}};
}

inline Report chamfer_command(const ChamferConfig& cfg) {
  const Trajectory ref = parse_trajectory(cfg.ref_traj);
  const Trajectory est = parse_trajectory(cfg.est_traj);
  const SimilarityTransform xf = umeyama(associate(ref, est, cfg.max_dt));
  Report r = chamfer_json(evaluate_chamfer(cfg, ref, est, xf));
  r["command"] = "chamfer";
  r["version"] = kVersion;
  r["config"] = chamfer_config_json(cfg);
  return r;
}

}  // namespace mvgeom
