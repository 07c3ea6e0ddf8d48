#pragma once

// Scene-level pipeline: a manifest naming every input of one (scene, style)
// pair, the joined `report`, and a synthetic scene generator whose ground
// truth is known exactly.

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mvgeom/commands.hpp"
#include "mvgeom/losses_command.hpp"
#include "mvgeom/image.hpp"
#include "mvgeom/npy.hpp"
#include "mvgeom/report.hpp"
#include "mvgeom/trajectory_io.hpp"

namespace mvgeom {

struct SceneManifest {
  fs::path image_dir;  // optional, informational
  fs::path stylized_dir;
  fs::path style_image;
  fs::path content_tokens;
  fs::path stylized_tokens;
  fs::path ref_disp;
  fs::path est_disp;
  fs::path ref_traj;
  fs::path est_traj;
  std::string intrinsics;
  std::size_t bins = kDefaultBins;
  std::size_t stride = kDefaultStride;
  double min_disp = kDefaultMinDisparity;
  double max_dt = kDefaultMaxDt;
  std::string frames = "all";
  PoseSource pose_source = PoseSource::Est;
  RteStat rte_stat = RteStat::Mean;
  double tau = kDefaultTau;
  double delta = kDefaultDelta;
  Schedule sg_schedule = kSgSchedule;
  Schedule depth_schedule = kDepthSchedule;

  /// Relative paths resolve against the manifest's directory.
  static SceneManifest load(const fs::path& path) {
    const Report j = read_report(path);
    const fs::path base = path.parent_path();
    auto resolve = [&](const char* key, bool required) -> fs::path {
      if (!j.contains(key)) {
        if (required) throw Error(ErrorCode::InvalidArgument, path.string() + ": missing field '" + key + "'");
        return {};
      }
      fs::path p = j[key].get<std::string>();
      return p.is_absolute() ? p : base / p;
    };

    SceneManifest m;
    m.image_dir = resolve("image_dir", false);
    m.stylized_dir = resolve("stylized_dir", true);
    m.style_image = resolve("style_image", true);
    m.content_tokens = resolve("content_tokens", true);
    m.stylized_tokens = resolve("stylized_tokens", true);
    m.ref_disp = resolve("ref_disp", true);
    m.est_disp = resolve("est_disp", true);
    m.ref_traj = resolve("ref_traj", true);
    m.est_traj = resolve("est_traj", true);
    m.intrinsics = j.value("intrinsics", std::string{});
    m.bins = j.value("bins", m.bins);
    m.stride = j.value("stride", m.stride);
    m.min_disp = j.value("min_disp", m.min_disp);
    m.max_dt = j.value("max_dt", m.max_dt);
    m.frames = j.value("frames", m.frames);
    const std::string pose_source = j.value("pose_source", std::string{"est"});
    if (pose_source != "est" && pose_source != "ref")
      throw Error(ErrorCode::InvalidArgument, "pose_source must be 'est' or 'ref'");
    m.pose_source = pose_source == "est" ? PoseSource::Est : PoseSource::Ref;
    const std::string rte_stat = j.value("rte_stat", std::string{"mean"});
    if (rte_stat != "mean" && rte_stat != "median")
      throw Error(ErrorCode::InvalidArgument, "rte_stat must be 'mean' or 'median'");
    m.rte_stat = rte_stat == "mean" ? RteStat::Mean : RteStat::Median;
    m.tau = j.value("tau", m.tau);
    m.delta = j.value("delta", m.delta);
    if (j.contains("schedules")) {
      const auto& s = j["schedules"];
      if (s.contains("sg")) m.sg_schedule = detail::schedule_from(s["sg"], m.sg_schedule);
      if (s.contains("depth")) m.depth_schedule = detail::schedule_from(s["depth"], m.depth_schedule);
    }
    return m;
  }

  /// Every referenced path must exist; the error names the first missing one.
  void check_paths() const {
    for (const fs::path* p : {&stylized_dir, &style_image, &content_tokens, &stylized_tokens, &ref_disp, &est_disp,
                              &ref_traj, &est_traj})
      if (!fs::exists(*p)) throw Error(ErrorCode::MissingFile, p->string());
    if (!image_dir.empty() && !fs::exists(image_dir)) throw Error(ErrorCode::MissingFile, image_dir.string());
  }
};

/// Joins the static (CHD, DSD) and reconstruction (alignment, ATE, RTE,
/// Chamfer) metrics of one scene into a single report.
inline Report run_report(const SceneManifest& m, unsigned threads = 1) {
  m.check_paths();

  ChdConfig chd_cfg{m.stylized_dir, m.style_image, m.bins, threads};
  const Report chd_r = chd_command(chd_cfg);
  const Report dsd_r = dsd_command({m.content_tokens, m.stylized_tokens, threads});

  const Trajectory ref = parse_trajectory(m.ref_traj);
  const Trajectory est = parse_trajectory(m.est_traj);
  const TrajResult traj = evaluate_trajectories(ref, est, m.max_dt);

  ChamferConfig cc;
  cc.ref_disp = m.ref_disp;
  cc.est_disp = m.est_disp;
  cc.ref_traj = m.ref_traj;
  cc.est_traj = m.est_traj;
  cc.intrinsics = m.intrinsics;
  cc.stride = m.stride;
  cc.min_disp = m.min_disp;
  cc.max_dt = m.max_dt;
  cc.frames = m.frames;
  cc.pose_source = m.pose_source;
  cc.threads = threads;
  const ChamferResult cloud = evaluate_chamfer(cc, ref, est, traj.xf);

  Report r;
  r["command"] = "report";
  r["version"] = kVersion;
  Report config = chamfer_config_json(cc);
  config["image_dir"] = m.image_dir.string();
  config["stylized_dir"] = m.stylized_dir.string();
  config["style_image"] = m.style_image.string();
  config["content_tokens"] = m.content_tokens.string();
  config["stylized_tokens"] = m.stylized_tokens.string();
  config["bins"] = m.bins;
  config["rte_stat"] = m.rte_stat == RteStat::Mean ? "mean" : "median";
  config["tau"] = m.tau;
  config["delta"] = m.delta;
  config["schedules"] = {{"sg", detail::schedule_json(m.sg_schedule)},
                         {"depth", detail::schedule_json(m.depth_schedule)}};
  r["config"] = config;
  r["chd"] = {{"mean", chd_r["chd_mean"]}, {"per_image", chd_r["per_image"]}};
  r["dsd"] = {{"mean", dsd_r["dsd_mean"]}, {"per_image", dsd_r["per_image"]}};
  r["trajectory"] = trajectory_json(traj, m.rte_stat);
  Report cloud_json = chamfer_json(cloud);
  cloud_json.erase("alignment");
  r["chamfer"] = cloud_json;
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthSpec {
  std::size_t frames = 10;
  std::size_t points = 2000;
  double scale = 1.5;
  Vec3 axis_angle = Vec3(0.1, -0.2, 0.3);
  Vec3 translation = Vec3(0.5, -1.0, 2.0);
  double center_noise = 0.0;
  double point_noise = 0.0;
  std::uint64_t seed = 1;
  std::size_t width = 64;
  std::size_t height = 48;
  std::size_t tokens = 64;
  std::size_t token_dim = 32;

  void validate() const {
    if (frames < 3) throw Error(ErrorCode::InvalidArgument, "synth needs at least 3 frames");
    if (points < 1) throw Error(ErrorCode::InvalidArgument, "synth needs at least 1 point");
    if (!(scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "synth scale must be positive");
    if (!(center_noise >= 0.0) || !(point_noise >= 0.0))
      throw Error(ErrorCode::InvalidArgument, "noise levels must be non-negative");
    if (width < 1 || height < 1 || tokens < 1 || token_dim < 1)
      throw Error(ErrorCode::InvalidArgument, "synth sizes must be positive");
  }

  SimilarityTransform transform() const {
    SimilarityTransform xf;
    xf.s = scale;
    const double angle = axis_angle.norm();
    xf.r = angle > 0.0 ? Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix() : Mat3::Identity();
    xf.t = translation;
    return xf;
  }
};

namespace detail {

/// Camera-to-world rotation whose optical (z) axis points from eye to target.
inline Mat3 look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = Vec3::UnitY().cross(z);
  if (x.norm() < 1e-9) x = Vec3::UnitX();
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

inline std::string timestamp_stem(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

inline std::string frame_name(std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%04zu%s", i, ext);
  return buf;
}

}  // namespace detail

/// Writes a complete synthetic scene under out_dir plus `manifest.json`.
///
/// The reference run looks at M random points from N cameras on an arc;
/// its disparity maps are the z-buffered splats of those points. The
/// estimated run is the reference mapped through the spec's similarity
/// (poses and depths scaled accordingly), then perturbed: camera centers by
/// isotropic noise of center_noise and per-pixel depths by point_noise, both
/// in reference units. With zero noise the estimated run is an exact similar
/// copy of the reference. Output is a pure function of the spec.
inline fs::path gen_synth(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  for (const char* sub : {"images", "stylized", "tokens/content", "tokens/stylized", "disp/ref", "disp/est"})
    fs::create_directories(out_dir / sub);

  const SimilarityTransform xf = spec.transform();
  const Intrinsics k = intrinsics_from_rule(spec.width, spec.height);

  std::vector<Vec3> scene(spec.points);
  for (auto& p : scene) p = Vec3(uniform(rng), uniform(rng), uniform(rng));

  Trajectory ref, est;
  const std::size_t n = spec.frames;
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = -0.6 + 1.2 * static_cast<double>(i) / static_cast<double>(n - 1);
    TimedPose pose;
    pose.timestamp = 0.1 * static_cast<double>(i);
    pose.position = Vec3(4.0 * std::sin(phi), std::sin(2.5 * phi) + 0.2, -4.0 * std::cos(phi));
    pose.orientation = Eigen::Quaterniond(detail::look_at(pose.position, Vec3::Zero()));
    pose.orientation.normalize();
    ref.poses.push_back(pose);

    TimedPose e;
    e.timestamp = pose.timestamp;
    Vec3 noise(normal(rng), normal(rng), normal(rng));
    e.position = xf.apply(pose.position) + xf.s * spec.center_noise * noise;
    e.orientation = Eigen::Quaterniond(xf.r * pose.rotation());
    e.orientation.normalize();
    est.poses.push_back(e);
  }
  write_trajectory(out_dir / "ref.txt", ref);
  write_trajectory(out_dir / "est.txt", est);

  const std::size_t w = spec.width, h = spec.height;
  for (std::size_t i = 0; i < n; ++i) {
    const Mat3 r = ref.poses[i].rotation();
    const Vec3 c = ref.poses[i].position;
    std::vector<double> depth(w * h, 0.0);
    for (const auto& p : scene) {
      const Vec3 cam = r.transpose() * (p - c);
      if (cam.z() <= 1e-6) continue;
      const double u = std::round(k.fx * cam.x() / cam.z() + k.cx);
      const double v = std::round(k.fy * cam.y() / cam.z() + k.cy);
      if (u < 0 || v < 0 || u >= static_cast<double>(w) || v >= static_cast<double>(h)) continue;
      double& slot = depth[static_cast<std::size_t>(v) * w + static_cast<std::size_t>(u)];
      if (slot == 0.0 || cam.z() < slot) slot = cam.z();
    }
    std::vector<double> d_ref(w * h, 0.0), d_est(w * h, 0.0);
    for (std::size_t px = 0; px < w * h; ++px) {
      const double noise = normal(rng);
      if (depth[px] == 0.0) continue;
      d_ref[px] = 1.0 / depth[px];
      const double z_noisy = std::max(depth[px] + spec.point_noise * noise, 0.5 * depth[px]);
      d_est[px] = 1.0 / (xf.s * z_noisy);
    }
    const std::string stem = detail::timestamp_stem(ref.poses[i].timestamp) + ".npy";
    write_array(out_dir / "disp/ref" / stem, ArrayFile({h, w}, d_ref));
    write_array(out_dir / "disp/est" / stem, ArrayFile({h, w}, d_est));

    // Smooth content frame, and a palette-remapped "stylized" version.
    ImageBuf content(h, w), stylized(h, w);
    const double a = 0.5 + 0.5 * uniform(rng), b = 0.5 + 0.5 * uniform(rng);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double fx = static_cast<double>(x) / static_cast<double>(w);
        const double fy = static_cast<double>(y) / static_cast<double>(h);
        const double rgb[3] = {a * fx, b * fy, 0.5 + 0.4 * std::sin(6.0 * (fx + fy) + static_cast<double>(i))};
        for (std::size_t ch = 0; ch < 3; ++ch) {
          content.at(y, x, ch) = std::clamp(rgb[ch], 0.0, 1.0);
          stylized.at(y, x, ch) = 0.15 + 0.7 * content.at(y, x, ch) * content.at(y, x, ch);
        }
      }
    write_png(out_dir / "images" / detail::frame_name(i, ".png"), content);
    write_png(out_dir / "stylized" / detail::frame_name(i, ".png"), stylized);

    std::vector<float> tok(spec.tokens * spec.token_dim), tok_sty(tok.size());
    for (std::size_t t = 0; t < tok.size(); ++t) {
      tok[t] = static_cast<float>(normal(rng));
      tok_sty[t] = static_cast<float>(tok[t] + 0.05 * normal(rng));
    }
    write_array(out_dir / "tokens/content" / detail::frame_name(i, ".npy"),
                ArrayFile({spec.tokens, spec.token_dim}, tok));
    write_array(out_dir / "tokens/stylized" / detail::frame_name(i, ".npy"),
                ArrayFile({spec.tokens, spec.token_dim}, tok_sty));
  }

  ImageBuf style(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(w);
      style.at(y, x, 0) = 0.2 + 0.6 * fx;
      style.at(y, x, 1) = 0.3;
      style.at(y, x, 2) = 0.8 - 0.5 * static_cast<double>(y) / static_cast<double>(h);
    }
  write_png(out_dir / "style.png", style);

  Report manifest = {{"image_dir", "images"},
                     {"stylized_dir", "stylized"},
                     {"style_image", "style.png"},
                     {"content_tokens", "tokens/content"},
                     {"stylized_tokens", "tokens/stylized"},
                     {"ref_disp", "disp/ref"},
                     {"est_disp", "disp/est"},
                     {"ref_traj", "ref.txt"},
                     {"est_traj", "est.txt"},
                     {"intrinsics", std::to_string(w) + "x" + std::to_string(h)},
                     {"stride", 1},
                     {"min_disp", kDefaultMinDisparity},
                     {"max_dt", kDefaultMaxDt},
                     {"frames", "all"},
                     {"pose_source", "est"},
                     {"rte_stat", "mean"}};
  manifest["synth"] = {{"frames", spec.frames},
                       {"points", spec.points},
                       {"scale", spec.scale},
                       {"axis_angle", {spec.axis_angle.x(), spec.axis_angle.y(), spec.axis_angle.z()}},
                       {"translation", {spec.translation.x(), spec.translation.y(), spec.translation.z()}},
                       {"center_noise", spec.center_noise},
                       {"point_noise", spec.point_noise},
                       {"seed", spec.seed},
                       {"width", spec.width},
                       {"height", spec.height}};
  const fs::path manifest_path = out_dir / "manifest.json";
  write_report(manifest_path, manifest);
  return manifest_path;
}

}  // namespace mvgeom
