// Command line front end for the fusion library. Every stage of the chain
// is exposed as a subcommand working on plain files, so the whole pipeline
// can be driven step by step or in one shot:
//
//   bevfuse simulate  -o scene.json
//   bevfuse preprocess --scene scene.json -o points.json
//   bevfuse heatmap   --points points.json -o heat.grid
//   bevfuse liftsplat --scene scene.json -o image.grid
//   bevfuse fuse      --points points.json --image image.grid -o refined.grid
//   bevfuse decode    --heat refined.grid -o submission.json
//   bevfuse loss      --heat refined.grid --scene scene.json -o loss.json
//   bevfuse eval      --submission submission.json --scene scene.json
//   bevfuse pipeline  -o report.json
//   bevfuse plot      --grid refined.grid -o heat.png
//
// Exit codes: 0 on success, 1 for validation and schema problems, 2 when a
// file cannot be read or written.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "bevfuse/io.hpp"
#include "bevfuse/pipeline.hpp"
#include "bevfuse/plot.hpp"

namespace {

using namespace bevfuse;
using nlohmann::json;

// Console display of [0, 1] metrics: three decimals with ties at the third
// decimal rounding down, so 0.4035 prints as 0.403. JSON reports keep full
// precision; this only affects summary lines.
std::string format3(double x) {
  long long milli = static_cast<long long>(std::ceil(x * 1000.0 - 0.5));
  const char* sign = "";
  if (milli < 0) {
    sign = "-";
    milli = -milli;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s%lld.%03lld", sign, milli / 1000,
                milli % 1000);
  return buf;
}

PipelineConfig make_config(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  return pipeline_config_from_json(io::load_config(path));
}

// The scene file stores mounting calibrations (sensor -> ego) for radar and
// camera alike; the camera's projection extrinsics are rebuilt against the
// keyframe radar frame on load.
io::SceneDocument scene_to_document(const synth::Scene& scene) {
  io::SceneDocument doc;
  for (std::size_t k = 0; k < scene.frames.size(); ++k) {
    const SweepFrame& f = scene.frames[k];
    io::FrameDoc fd;
    fd.timestamp = f.timestamp;
    fd.ego_pose = f.ego_to_global;
    io::RadarEntry radar;
    radar.name = "radar_front";
    radar.calib = f.radar_to_ego;
    radar.points = f.points;
    fd.radars.push_back(std::move(radar));
    if (k == 0) {
      for (const CameraModel& cam : scene.cameras) {
        io::CameraEntry ce;
        ce.name = "cam_front";
        ce.intrinsics = cam.intrinsics;
        ce.calib = compose(f.radar_to_ego, invert(cam.extrinsics));
        ce.width = cam.width;
        ce.height = cam.height;
        fd.cameras.push_back(std::move(ce));
      }
      fd.annotations = scene.gt_boxes;
    }
    doc.frames.push_back(std::move(fd));
  }
  return doc;
}

synth::Scene document_to_scene(const io::SceneDocument& doc) {
  if (doc.frames.empty()) throw ValidationError("scene has no frames");
  synth::Scene scene;
  for (const io::FrameDoc& fd : doc.frames) {
    if (fd.radars.empty()) {
      throw ValidationError("every frame needs at least one radar");
    }
    SweepFrame f;
    f.timestamp = fd.timestamp;
    f.points = fd.radars[0].points;
    f.radar_to_ego = fd.radars[0].calib;
    f.ego_to_global = fd.ego_pose;
    scene.frames.push_back(std::move(f));
  }
  const io::FrameDoc& key = doc.frames[0];
  scene.ref_pose.ref_from_ego = invert(key.radars[0].calib);
  scene.ref_pose.ego_to_global = key.ego_pose;
  scene.gt_boxes = key.annotations;
  for (const io::CameraEntry& ce : key.cameras) {
    CameraModel cam;
    cam.intrinsics = ce.intrinsics;
    cam.extrinsics = compose(invert(ce.calib), key.radars[0].calib);
    cam.width = ce.width;
    cam.height = ce.height;
    scene.cameras.push_back(std::move(cam));
  }
  return scene;
}

std::vector<RadarPoint> parse_points_file(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("invalid JSON: ") + e.what());
  }
  return io::points_from_json(j);
}

int cmd_simulate(const PipelineConfig& cfg, const std::string& out) {
  const synth::Scene scene = synth::generate_scene(cfg.scene);
  const io::SceneDocument doc = scene_to_document(scene);
  io::write_scene(doc, out);
  std::size_t n_points = 0;
  for (const auto& f : doc.frames) n_points += f.radars[0].points.size();
  std::cout << "scene: " << doc.frames.size() << " frames, "
            << doc.frames[0].annotations.size() << " boxes, " << n_points
            << " returns -> " << out << "\n";
  return 0;
}

int cmd_preprocess(const PipelineConfig& cfg, const std::string& scene_path,
                   const std::string& out) {
  const synth::Scene scene = document_to_scene(io::parse_scene(scene_path));
  const std::vector<RadarPoint> points =
      accumulate_sweeps(scene.frames, scene.ref_pose, cfg.filter);
  io::atomic_write_file(out, io::canonical_dump(io::points_to_json(points)));
  std::size_t raw = 0;
  for (const auto& f : scene.frames) raw += f.points.size();
  std::cout << "accumulated " << points.size() << " of " << raw
            << " returns across " << scene.frames.size() << " sweeps -> "
            << out << "\n";
  return 0;
}

int cmd_heatmap(const PipelineConfig& cfg, const std::string& points_path,
                const std::string& out) {
  const std::vector<RadarPoint> points = parse_points_file(points_path);
  const BevGrid heat =
      radar_heatmap(points, cfg.fused_spec(kRadarHeatmapChannels),
                    RadarHeatmapConfig{cfg.heatmap_tau});
  io::write_grid(heat, out);
  std::cout << "measurement heatmap: " << heat.rows() << "x" << heat.cols()
            << "x" << heat.channels() << " -> " << out << "\n";
  return 0;
}

int cmd_liftsplat(const PipelineConfig& cfg, const std::string& scene_path,
                  const std::string& out) {
  const synth::Scene scene = document_to_scene(io::parse_scene(scene_path));
  if (scene.cameras.empty()) {
    throw ValidationError("the keyframe carries no camera");
  }
  const ClassMap classes(cfg.scene.classes);
  const CameraModel& cam = scene.cameras[0];
  const FrustumSpec fspec = FrustumSpec::uniform(
      static_cast<int>(cam.height / cfg.frustum_stride),
      static_cast<int>(cam.width / cfg.frustum_stride), cfg.frustum_stride,
      cfg.depth_min, cfg.depth_max, cfg.depth_step);
  const ImageFeatureMap fm = synth::ideal_image_observation(
      scene, cam, fspec, classes, cfg.feature_amplitude, cfg.fused_cell);
  const Frustum frustum =
      make_frustum(fm, cam, fspec.depth_bins, invert(cam.extrinsics));
  const BevGrid bev = splat_to_bev(frustum, cfg.image_spec(classes.size()));
  io::write_grid(bev, out);
  std::cout << "camera BEV features: " << bev.rows() << "x" << bev.cols()
            << "x" << bev.channels() << " -> " << out << "\n";
  return 0;
}

int cmd_fuse(const PipelineConfig& cfg, const std::string& points_path,
             const std::string& image_path, const std::string& out) {
  const std::vector<RadarPoint> points = parse_points_file(points_path);
  int n_sweeps = 1;
  for (const auto& p : points) {
    n_sweeps = std::max(n_sweeps, p.sweep_index + 1);
  }
  std::vector<std::pair<int, BevGrid>> per_sweep;
  for (int k = 0; k < n_sweeps; ++k) {
    std::vector<RadarPoint> sweep;
    for (const auto& p : points) {
      if (p.sweep_index == k) sweep.push_back(p);
    }
    per_sweep.emplace_back(k, voxelize(sweep, cfg.radar_spec()));
  }
  const BevGrid radar_features = temporal_merge(per_sweep, cfg.temporal_decay);
  const BevGrid radar_heat =
      radar_heatmap(points, cfg.fused_spec(kRadarHeatmapChannels),
                    RadarHeatmapConfig{cfg.heatmap_tau});
  const BevGrid image_bev = io::read_grid(image_path);
  const int n_classes = image_bev.channels();

  const ConvKernel k_pf = detail::load_or(
      cfg.point_fusion_kernel_path,
      detail::passthrough_point_fusion_kernel(kVoxelChannels, n_classes));
  const ConvKernel k_pred = detail::load_or(
      cfg.predict_kernel_path, ConvKernel::identity_1x1(n_classes));
  const ConvKernel k_roi = detail::load_or(
      cfg.roi_kernel_path, detail::averaging_roi_kernel(n_classes));

  const BevGrid fused = point_fusion(image_bev, radar_features, k_pf);
  const BevGrid heat = predict_heatmap(fused, k_pred);
  const BevGrid refined = roi_fusion(heat, radar_heat, k_roi);
  io::write_grid(refined, out);
  std::cout << "refined class scores: " << refined.rows() << "x"
            << refined.cols() << "x" << refined.channels() << " -> " << out
            << "\n";
  return 0;
}

int cmd_decode(const PipelineConfig& cfg, const std::string& heat_path,
               const std::string& key, const std::string& out) {
  const BevGrid heat = io::read_grid(heat_path);
  const ClassMap classes(cfg.scene.classes);
  const RegressionMaps maps = RegressionMaps::zeros(
      heat.spec(), static_cast<int>(cfg.decode.yaw_bin_centers.size()));
  const std::vector<Box3D> dets =
      decode_detections(heat, maps, classes, cfg.decode);
  io::write_submission({{key, dets}}, out);
  std::cout << "decoded " << dets.size() << " boxes under key \"" << key
            << "\" -> " << out << "\n";
  return 0;
}

int cmd_loss(const PipelineConfig& cfg, const std::string& heat_path,
             const std::string& scene_path, const std::string& out) {
  const BevGrid heat = io::read_grid(heat_path);
  const io::SceneDocument doc = io::parse_scene(scene_path);
  if (doc.frames.empty()) throw ValidationError("scene has no frames");
  const std::vector<Box3D>& boxes = doc.frames[0].annotations;
  const ClassMap classes(cfg.scene.classes);

  const BevGrid target = gt_heatmap(boxes, heat.spec(), classes, cfg.gt_heat);
  const FocalResult focal = focal_loss(heat, target);

  json reg{{"offset", 0.0},   {"dims", 0.0},       {"velocity", 0.0},
           {"rotation", 0.0}, {"attributes", 0.0}, {"total", 0.0}};
  double reg_total = 0.0;
  if (!boxes.empty()) {
    const auto& centers = cfg.decode.yaw_bin_centers;
    const int n_bins = static_cast<int>(centers.size());
    std::vector<ObjectTarget> gts, preds;
    for (const Box3D& b : boxes) {
      gts.push_back(build_target(b, heat.spec(), centers));
      preds.push_back(ObjectTarget::zeros(n_bins, 0));
    }
    RegLossConfig reg_cfg;
    reg_cfg.yaw_bin_centers = centers;
    const RegLossResult r = reg_losses(preds, gts, reg_cfg);
    reg = {{"offset", r.offset},     {"dims", r.dims},
           {"velocity", r.velocity}, {"rotation", r.rotation},
           {"attributes", r.attributes}, {"total", r.total}};
    reg_total = r.total;
  }
  json j{{"classification", focal.value},
         {"regression", reg},
         {"total", total_loss(focal.value, reg_total)},
         {"num_boxes", boxes.size()}};
  io::atomic_write_file(out, io::canonical_dump(j));
  std::cout << "loss: classification " << focal.value << ", regression "
            << reg_total << ", total " << j.at("total").get<double>()
            << " -> " << out << "\n";
  return 0;
}

int cmd_eval(const PipelineConfig& cfg, const std::string& submission_path,
             const std::string& scene_path, const std::string& aggregates_path,
             const std::string& out) {
  if (!aggregates_path.empty()) {
    json j;
    try {
      j = json::parse(io::read_file(aggregates_path));
    } catch (const json::parse_error& e) {
      throw SchemaError("/", std::string("invalid JSON: ") + e.what());
    }
    const auto rows = io::aggregates_from_json(j);
    for (const auto& row : rows) {
      std::cout << "mAP " << format3(row.map) << "  NDS "
                << format3(nds(row.map, row.mtp)) << "\n";
    }
    return 0;
  }
  if (submission_path.empty() || scene_path.empty()) {
    throw ValidationError(
        "eval needs --submission and --scene, or --aggregates");
  }
  const auto preds = io::parse_submission(submission_path);
  const io::SceneDocument doc = io::parse_scene(scene_path);
  if (doc.frames.empty()) throw ValidationError("scene has no frames");
  const std::map<std::string, std::vector<Box3D>> gts{
      {"frame_0", doc.frames[0].annotations}};
  EvalConfig eval_cfg;
  eval_cfg.classes = cfg.scene.classes;
  eval_cfg.dist_thresholds = cfg.dist_thresholds;
  eval_cfg.tp_threshold = cfg.tp_threshold;
  const EvalReport report = evaluate(preds, gts, eval_cfg);
  if (!out.empty()) {
    io::atomic_write_file(out, io::canonical_dump(io::report_to_json(report)));
  }
  std::cout << "mAP " << format3(report.map) << "  NDS "
            << format3(report.nds_value) << "  mATE " << format3(report.mtp.mate)
            << "\n";
  return 0;
}

int cmd_pipeline(const PipelineConfig& cfg, const std::string& out) {
  const PipelineArtifacts art = run_pipeline(cfg);
  if (!out.empty()) {
    io::atomic_write_file(out, io::canonical_dump(art.report_json));
  }
  std::cout << "detections " << art.detections.size() << "  mAP "
            << format3(art.report.map) << "  NDS " << format3(art.report.nds_value)
            << "  mATE " << format3(art.report.mtp.mate);
  if (!out.empty()) std::cout << "  -> " << out;
  std::cout << "\n";
  return 0;
}

int cmd_plot(const std::string& grid_path, const std::string& scene_path,
             const std::string& submission_path, int scale,
             const std::string& out) {
  const BevGrid grid = io::read_grid(grid_path);
  std::vector<Box3D> gts;
  if (!scene_path.empty()) {
    const io::SceneDocument doc = io::parse_scene(scene_path);
    if (!doc.frames.empty()) gts = doc.frames[0].annotations;
  }
  std::vector<Box3D> dets;
  if (!submission_path.empty()) {
    for (const auto& [key, boxes] : io::parse_submission(submission_path)) {
      dets.insert(dets.end(), boxes.begin(), boxes.end());
    }
  }
  const std::vector<std::uint8_t> png =
      plot::render_heatmap_png(grid, gts, dets, scale);
  io::atomic_write_file(out,
                        std::string(png.begin(), png.end()));
  std::cout << "rendered " << grid.rows() * scale << "x"
            << grid.cols() * scale << " image -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radar-camera BEV fusion toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path,
                 "TOML or JSON configuration file")
      ->expected(1);

  std::uint64_t seed = 0;
  bool seed_set = false;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic scene");
  std::string sim_out;
  sim->add_option("-o,--output", sim_out, "scene file to write")->required();
  sim->add_option("--seed", seed, "override the scene seed")
      ->each([&](const std::string&) { seed_set = true; });

  auto* pre = app.add_subcommand(
      "preprocess", "filter sweeps and accumulate them into one point set");
  std::string pre_scene, pre_out;
  pre->add_option("--scene", pre_scene, "scene file")->required();
  pre->add_option("-o,--output", pre_out, "point set to write")->required();

  auto* heat = app.add_subcommand(
      "heatmap", "rasterize accumulated returns into a measurement heatmap");
  std::string heat_points, heat_out;
  heat->add_option("--points", heat_points, "accumulated point set")
      ->required();
  heat->add_option("-o,--output", heat_out, "grid dump to write")->required();

  auto* lift = app.add_subcommand(
      "liftsplat", "lift camera features along depth and splat them to BEV");
  std::string lift_scene, lift_out;
  lift->add_option("--scene", lift_scene, "scene file")->required();
  lift->add_option("-o,--output", lift_out, "grid dump to write")->required();

  auto* fuse = app.add_subcommand(
      "fuse", "fuse radar voxels with camera BEV features and refine scores");
  std::string fuse_points, fuse_image, fuse_out;
  fuse->add_option("--points", fuse_points, "accumulated point set")
      ->required();
  fuse->add_option("--image", fuse_image, "camera BEV grid dump")->required();
  fuse->add_option("-o,--output", fuse_out, "refined grid dump to write")
      ->required();

  auto* dec = app.add_subcommand("decode",
                                 "extract boxes from a class score grid");
  std::string dec_heat, dec_key = "frame_0", dec_out;
  dec->add_option("--heat", dec_heat, "class score grid dump")->required();
  dec->add_option("--key", dec_key, "sample key for the submission");
  dec->add_option("-o,--output", dec_out, "submission file to write")
      ->required();

  auto* loss = app.add_subcommand(
      "loss", "score a class grid against a scene's annotations");
  std::string loss_heat, loss_scene, loss_out;
  loss->add_option("--heat", loss_heat, "class score grid dump")->required();
  loss->add_option("--scene", loss_scene, "scene file")->required();
  loss->add_option("-o,--output", loss_out, "loss summary to write")
      ->required();

  auto* ev = app.add_subcommand(
      "eval", "evaluate a submission (or precomputed aggregate rows)");
  std::string ev_submission, ev_scene, ev_aggregates, ev_out;
  ev->add_option("--submission", ev_submission, "submission file");
  ev->add_option("--scene", ev_scene, "scene file with annotations");
  ev->add_option("--aggregates", ev_aggregates,
                 "aggregate metric rows to composite-score");
  ev->add_option("-o,--output", ev_out, "report file to write");

  auto* pipe = app.add_subcommand("pipeline",
                                  "run the whole chain on one scene");
  std::string pipe_out;
  pipe->add_option("-o,--output", pipe_out, "report file to write");
  pipe->add_option("--seed", seed, "override the scene seed")
      ->each([&](const std::string&) { seed_set = true; });

  auto* plot_cmd = app.add_subcommand("plot", "render a grid dump as a PNG");
  std::string plot_grid, plot_scene, plot_submission, plot_out;
  int plot_scale = 4;
  plot_cmd->add_option("--grid", plot_grid, "grid dump to render")
      ->required();
  plot_cmd->add_option("--scene", plot_scene,
                       "draw this scene's boxes in white");
  plot_cmd->add_option("--dets", plot_submission,
                       "draw this submission's boxes in red");
  plot_cmd->add_option("--scale", plot_scale, "pixels per cell");
  plot_cmd->add_option("-o,--output", plot_out, "image file to write")
      ->required();

  // Let the shared --config/--seed options appear after the subcommand too.
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg = make_config(config_path);
    if (seed_set) cfg.scene.seed = seed;
    if (*sim) return cmd_simulate(cfg, sim_out);
    if (*pre) return cmd_preprocess(cfg, pre_scene, pre_out);
    if (*heat) return cmd_heatmap(cfg, heat_points, heat_out);
    if (*lift) return cmd_liftsplat(cfg, lift_scene, lift_out);
    if (*fuse) return cmd_fuse(cfg, fuse_points, fuse_image, fuse_out);
    if (*dec) return cmd_decode(cfg, dec_heat, dec_key, dec_out);
    if (*loss) return cmd_loss(cfg, loss_heat, loss_scene, loss_out);
    if (*ev) return cmd_eval(cfg, ev_submission, ev_scene, ev_aggregates,
                             ev_out);
    if (*pipe) return cmd_pipeline(cfg, pipe_out);
    if (*plot_cmd) {
      return cmd_plot(plot_grid, plot_scene, plot_submission, plot_scale,
                      plot_out);
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "schema error at " << e.where() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
