// mvgeom command-line front end.
//
// Exit codes: 0 success, 2 input or usage error, 3 numeric/degenerate error.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>

#include "mvgeom/commands.hpp"
#include "mvgeom/losses_command.hpp"
#include "mvgeom/scene.hpp"

namespace {

using namespace mvgeom;

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

void emit(const Report& r, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << format_report(r);
  else
    write_report(out, r);
}

Vec3 parse_vec3(const std::string& s, const std::string& what) {
  const auto parts = detail::split(s, ',');
  if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, what + " needs three comma-separated values");
  return {detail::parse_number(parts[0], what), detail::parse_number(parts[1], what),
          detail::parse_number(parts[2], what)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-consistency metrics for stylized multi-view image sets"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  unsigned threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (default: MVGEOM_THREADS or hardware concurrency)")
      ->check(CLI::PositiveNumber);
  std::string out;

  ChdConfig chd;
  auto* chd_cmd = app.add_subcommand("chd", "Color histogram distance of stylized images to a style image");
  chd_cmd->add_option("--stylized", chd.stylized_dir, "Directory of stylized images")->required();
  chd_cmd->add_option("--style", chd.style_image, "Style image")->required();
  chd_cmd->add_option("--bins", chd.bins, "Histogram bins per channel")->capture_default_str();
  chd_cmd->add_option("--out", out, "Report path (default: stdout)");

  DsdConfig dsd;
  auto* dsd_cmd = app.add_subcommand("dsd", "DINO self-similarity distance between paired token files");
  dsd_cmd->add_option("--content-tokens", dsd.content_dir, "Directory of content token arrays")->required();
  dsd_cmd->add_option("--stylized-tokens", dsd.stylized_dir, "Directory of stylized token arrays")->required();
  dsd_cmd->add_option("--out", out, "Report path (default: stdout)");

  TrajConfig traj;
  std::string rte_stat = "mean";
  auto* traj_cmd = app.add_subcommand("traj", "Similarity alignment, ATE and RTE of two trajectories");
  traj_cmd->add_option("--ref", traj.ref, "Reference trajectory")->required();
  traj_cmd->add_option("--est", traj.est, "Estimated trajectory")->required();
  traj_cmd->add_option("--max-dt", traj.max_dt, "Association tolerance in seconds")->capture_default_str();
  traj_cmd->add_option("--rte-stat", rte_stat, "Headline RTE statistic")
      ->check(CLI::IsMember({"mean", "median"}))
      ->capture_default_str();
  traj_cmd->add_option("--out", out, "Report path (default: stdout)");

  ChamferConfig cham;
  std::string pose_source = "est";
  auto* cham_cmd = app.add_subcommand("chamfer", "Chamfer distance between back-projected point clouds");
  cham_cmd->add_option("--ref-disp", cham.ref_disp, "Directory of reference disparity arrays")->required();
  cham_cmd->add_option("--est-disp", cham.est_disp, "Directory of estimated disparity arrays")->required();
  cham_cmd->add_option("--ref-traj", cham.ref_traj, "Reference trajectory")->required();
  cham_cmd->add_option("--est-traj", cham.est_traj, "Estimated trajectory")->required();
  cham_cmd->add_option("--intrinsics", cham.intrinsics, "WxH or fx,fy,cx,cy (default: rule from map size)");
  cham_cmd->add_option("--stride", cham.stride, "Pixel stride")->capture_default_str();
  cham_cmd->add_option("--min-disp", cham.min_disp, "Minimum disparity")->capture_default_str();
  cham_cmd->add_option("--max-dt", cham.max_dt, "Association tolerance in seconds")->capture_default_str();
  cham_cmd->add_option("--frames", cham.frames, "Frame selector, e.g. all or 0,2,5-9")->capture_default_str();
  cham_cmd->add_option("--pose-source", pose_source, "Poses used for the estimated cloud")
      ->check(CLI::IsMember({"est", "ref"}))
      ->capture_default_str();
  cham_cmd->add_option("--out", out, "Report path (default: stdout)");

  std::string losses_spec;
  auto* loss_cmd = app.add_subcommand("losses", "Evaluate training-loss kernels from a JSON spec");
  loss_cmd->add_option("--spec", losses_spec, "Loss spec JSON")->required();
  loss_cmd->add_option("--out", out, "Report path (default: stdout)");

  SynthSpec synth;
  std::string synth_out, rot = "0.1,-0.2,0.3", trans = "0.5,-1,2";
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene with known ground truth");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--frames", synth.frames, "Frame count")->capture_default_str();
  synth_cmd->add_option("--points", synth.points, "Scene point count")->capture_default_str();
  synth_cmd->add_option("--scale", synth.scale, "Similarity scale")->capture_default_str();
  synth_cmd->add_option("--rotation", rot, "Similarity rotation as axis-angle ax,ay,az")->capture_default_str();
  synth_cmd->add_option("--translation", trans, "Similarity translation tx,ty,tz")->capture_default_str();
  synth_cmd->add_option("--center-noise", synth.center_noise, "Camera center noise")->capture_default_str();
  synth_cmd->add_option("--point-noise", synth.point_noise, "Depth noise")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--width", synth.width, "Image width")->capture_default_str();
  synth_cmd->add_option("--height", synth.height, "Image height")->capture_default_str();

  std::string manifest;
  auto* report_cmd = app.add_subcommand("report", "Full per-scene report from a manifest");
  report_cmd->add_option("--manifest", manifest, "Scene manifest JSON")->required();
  report_cmd->add_option("--out", out, "Report path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*chd_cmd) {
      chd.threads = threads;
      emit(chd_command(chd), out);
    } else if (*dsd_cmd) {
      dsd.threads = threads;
      emit(dsd_command(dsd), out);
    } else if (*traj_cmd) {
      traj.rte_stat = rte_stat == "mean" ? RteStat::Mean : RteStat::Median;
      emit(traj_command(traj), out);
    } else if (*cham_cmd) {
      cham.pose_source = pose_source == "est" ? PoseSource::Est : PoseSource::Ref;
      cham.threads = threads;
      emit(chamfer_command(cham), out);
    } else if (*loss_cmd) {
      emit(losses_command(losses_spec), out);
    } else if (*synth_cmd) {
      synth.axis_angle = parse_vec3(rot, "--rotation");
      synth.translation = parse_vec3(trans, "--translation");
      std::cout << gen_synth(synth, synth_out).string() << "\n";
    } else if (*report_cmd) {
      emit(run_report(SceneManifest::load(manifest), threads), out);
    }
  } catch (const Error& e) {
    std::cerr << "mvgeom: " << e.what() << "\n";
    return is_numeric_error(e.code()) ? kExitNumeric : kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "mvgeom: MalformedInput: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "mvgeom: IoFailure: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
