#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevfuse/box.hpp"
#include "bevfuse/errors.hpp"
#include "bevfuse/fusion.hpp"
#include "bevfuse/grid.hpp"
#include "bevfuse/head.hpp"
#include "bevfuse/heatmap.hpp"
#include "bevfuse/io.hpp"
#include "bevfuse/metrics.hpp"
#include "bevfuse/radar.hpp"
#include "bevfuse/synth.hpp"
#include "bevfuse/view_transform.hpp"

namespace bevfuse {

// Desk-scale end-to-end configuration. Three nested rasters share one
// extent: the image BEV grid at fused_cell / 2, the fused grid, and the
// radar voxel grid at fused_cell * 2, so the two resampling steps inside
// point_fusion land both inputs on the fused raster.
struct PipelineConfig {
  synth::SceneConfig scene;
  FilterConfig filter;
  double temporal_decay = 0.5;
  double x_min = 0.0;
  double x_max = 48.0;
  double y_min = -24.0;
  double y_max = 24.0;
  double fused_cell = 0.5;
  // Kernel scale floor for the radar heatmap. Wider than the library
  // default: it smooths voxel-center quantization so each object's fused
  // peak stays at its center cell.
  double heatmap_tau = 4.0;
  GtHeatmapConfig gt_heat;
  double frustum_stride = 1.0;
  double depth_min = 1.0;
  double depth_max = 47.0;
  double depth_step = 0.25;
  double feature_amplitude = 32.0;
  DecodeConfig decode{.score_threshold = 0.01, .max_detections = 50};
  std::vector<double> dist_thresholds = {0.5, 1.0, 2.0, 4.0};
  double tp_threshold = 2.0;
  // Optional kernel fixture paths; empty strings select the built-in
  // pass-through / averaging kernels.
  std::string point_fusion_kernel_path;
  std::string predict_kernel_path;
  std::string roi_kernel_path;

  GridSpec fused_spec(int channels) const {
    return GridSpec{x_min, x_max, y_min, y_max, fused_cell, channels};
  }
  GridSpec image_spec(int channels) const {
    return GridSpec{x_min, x_max, y_min, y_max, fused_cell / 2.0, channels};
  }
  GridSpec radar_spec() const {
    return GridSpec{x_min, x_max, y_min, y_max, fused_cell * 2.0,
                    kVoxelChannels};
  }

  void validate() const {
    scene.validate();
    filter.validate();
    fused_spec(1).validate();
    image_spec(1).validate();
    radar_spec().validate();
    if (!(heatmap_tau > 0.0)) throw ValidationError("tau must be positive");
    if (!(frustum_stride > 0.0)) {
      throw ValidationError("stride must be positive");
    }
  }
};

struct PipelineArtifacts {
  synth::Scene scene;
  std::vector<RadarPoint> accumulated;
  BevGrid radar_features;   // temporal-merged voxel grid
  BevGrid radar_heat;       // 6-channel measurement heatmap, fused raster
  BevGrid image_bev;        // splatted camera features
  BevGrid fused;            // point-fusion output
  BevGrid pf_heat;          // first-stage class scores
  BevGrid refined;          // roi-fusion refined scores
  std::vector<Box3D> detections;
  EvalReport report;
  nlohmann::json report_json;

  PipelineArtifacts(const GridSpec& a, const GridSpec& b, const GridSpec& c,
                    const GridSpec& d, const GridSpec& e, const GridSpec& f)
      : radar_features(a), radar_heat(b), image_bev(c), fused(d), pf_heat(e),
        refined(f) {}
};

namespace detail {

// Image pass-through: radar channels weighted zero. The learned mixing this
// stands in for is out of scope; the kernel is ordinary data and can be
// replaced through the config.
inline ConvKernel passthrough_point_fusion_kernel(int radar_ch, int img_ch) {
  ConvKernel k = ConvKernel::zeros(1, 1, radar_ch + img_ch, img_ch);
  for (int c = 0; c < img_ch; ++c) k.at(0, 0, radar_ch + c, c) = 1.0;
  return k;
}

// Per-class mean over the six radar heatmap channels.
inline ConvKernel averaging_roi_kernel(int classes) {
  ConvKernel k = ConvKernel::zeros(1, 1, classes * kRadarHeatmapChannels,
                                   classes);
  for (int c = 0; c < classes; ++c) {
    for (int a = 0; a < kRadarHeatmapChannels; ++a) {
      k.at(0, 0, c * kRadarHeatmapChannels + a, c) =
          1.0 / kRadarHeatmapChannels;
    }
  }
  return k;
}

inline ConvKernel load_or(const std::string& path, const ConvKernel& fallback) {
  if (path.empty()) return fallback;
  return io::kernel_from_json(nlohmann::json::parse(io::read_file(path)), "");
}

}  // namespace detail

// Runs the whole chain on a generated scene: accumulate and filter sweeps,
// voxelize per sweep and merge, build the measurement heatmap, lift-splat
// the camera features, fuse twice, decode, and score against the scene's
// own annotations. Deterministic in (config, seed).
inline PipelineArtifacts run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const ClassMap classes(cfg.scene.classes);
  const int n_classes = classes.size();

  synth::Scene scene = synth::generate_scene(cfg.scene);

  // Radar branch.
  std::vector<RadarPoint> points =
      accumulate_sweeps(scene.frames, scene.ref_pose, cfg.filter);
  std::vector<std::pair<int, BevGrid>> per_sweep;
  for (int k = 0; k < cfg.scene.num_frames; ++k) {
    std::vector<RadarPoint> sweep_points;
    for (const auto& p : points) {
      if (p.sweep_index == k) sweep_points.push_back(p);
    }
    per_sweep.emplace_back(k, voxelize(sweep_points, cfg.radar_spec()));
  }
  BevGrid radar_features = temporal_merge(per_sweep, cfg.temporal_decay);
  GridSpec heat_spec = cfg.fused_spec(kRadarHeatmapChannels);
  BevGrid radar_heat =
      radar_heatmap(points, heat_spec, RadarHeatmapConfig{cfg.heatmap_tau});

  // Camera branch.
  const CameraModel& cam = scene.cameras.at(0);
  const FrustumSpec fspec = FrustumSpec::uniform(
      static_cast<int>(cam.height / cfg.frustum_stride),
      static_cast<int>(cam.width / cfg.frustum_stride), cfg.frustum_stride,
      cfg.depth_min, cfg.depth_max, cfg.depth_step);
  const ImageFeatureMap fm = synth::ideal_image_observation(
      scene, cam, fspec, classes, cfg.feature_amplitude, cfg.fused_cell);
  const Frustum frustum =
      make_frustum(fm, cam, fspec.depth_bins, invert(cam.extrinsics));
  BevGrid image_bev = splat_to_bev(frustum, cfg.image_spec(n_classes));

  // Fusion and decoding.
  const ConvKernel k_pf = detail::load_or(
      cfg.point_fusion_kernel_path,
      detail::passthrough_point_fusion_kernel(kVoxelChannels, n_classes));
  const ConvKernel k_pred = detail::load_or(cfg.predict_kernel_path,
                                            ConvKernel::identity_1x1(n_classes));
  const ConvKernel k_roi = detail::load_or(
      cfg.roi_kernel_path, detail::averaging_roi_kernel(n_classes));
  BevGrid fused = point_fusion(image_bev, radar_features, k_pf);
  BevGrid pf_heat = predict_heatmap(fused, k_pred);
  BevGrid refined = roi_fusion(pf_heat, radar_heat, k_roi);
  std::vector<Box3D> detections = decode_detections(
      refined, RegressionMaps::zeros(refined.spec(),
                                     static_cast<int>(
                                         cfg.decode.yaw_bin_centers.size())),
      classes, cfg.decode);

  // Score against the scene's own annotations.
  EvalConfig eval_cfg;
  eval_cfg.classes = cfg.scene.classes;
  eval_cfg.dist_thresholds = cfg.dist_thresholds;
  eval_cfg.tp_threshold = cfg.tp_threshold;
  const std::map<std::string, std::vector<Box3D>> preds{
      {"frame_0", detections}};
  const std::map<std::string, std::vector<Box3D>> gts{
      {"frame_0", scene.gt_boxes}};
  EvalReport report = evaluate(preds, gts, eval_cfg);

  PipelineArtifacts art(radar_features.spec(), radar_heat.spec(),
                        image_bev.spec(), fused.spec(), pf_heat.spec(),
                        refined.spec());
  art.scene = std::move(scene);
  art.accumulated = std::move(points);
  art.radar_features = std::move(radar_features);
  art.radar_heat = std::move(radar_heat);
  art.image_bev = std::move(image_bev);
  art.fused = std::move(fused);
  art.pf_heat = std::move(pf_heat);
  art.refined = std::move(refined);
  art.detections = std::move(detections);
  art.report = report;
  art.report_json = io::report_to_json(report);
  return art;
}

// ---------------------------------------------------------------------------
// Config loading (shared by the CLI): defaults above, overridden by any keys
// present in the JSON tree (which may have come from TOML).

namespace detail {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void maybe_set_int(const nlohmann::json& j, const char* key, int& out) {
  if (j.contains(key)) out = j.at(key).get<int>();
}

}  // namespace detail

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    detail::maybe(s, "seed", cfg.scene.seed);
    detail::maybe_set_int(s, "num_frames", cfg.scene.num_frames);
    detail::maybe(s, "sweep_period", cfg.scene.sweep_period);
    detail::maybe(s, "ego_speed", cfg.scene.ego_speed);
    detail::maybe(s, "ego_yaw_rate", cfg.scene.ego_yaw_rate);
    detail::maybe_set_int(s, "num_objects", cfg.scene.num_objects);
    detail::maybe(s, "classes", cfg.scene.classes);
    detail::maybe(s, "min_separation", cfg.scene.min_separation);
    detail::maybe(s, "max_object_speed", cfg.scene.max_object_speed);
    detail::maybe(s, "size_jitter", cfg.scene.size_jitter);
    detail::maybe(s, "position_noise", cfg.scene.position_noise);
    detail::maybe(s, "velocity_noise", cfg.scene.velocity_noise);
    detail::maybe(s, "rcs_noise", cfg.scene.rcs_noise);
    detail::maybe(s, "clutter_rate", cfg.scene.clutter_rate);
    detail::maybe(s, "perimeter_step", cfg.scene.perimeter_step);
    detail::maybe(s, "base_rms", cfg.scene.base_rms);
    detail::maybe(s, "camera_focal", cfg.scene.camera_focal);
    detail::maybe_set_int(s, "camera_width", cfg.scene.camera_width);
    detail::maybe_set_int(s, "camera_height", cfg.scene.camera_height);
    detail::maybe(s, "place_x_min", cfg.scene.place_x_min);
    detail::maybe(s, "place_x_max", cfg.scene.place_x_max);
    detail::maybe(s, "place_y_min", cfg.scene.place_y_min);
    detail::maybe(s, "place_y_max", cfg.scene.place_y_max);
  }
  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    detail::maybe(f, "min_rcs", cfg.filter.min_rcs);
    detail::maybe_set_int(f, "max_false_alarm", cfg.filter.max_false_alarm);
    if (f.contains("valid_states")) {
      cfg.filter.allowed_valid_states.clear();
      for (const auto& v : f.at("valid_states")) {
        cfg.filter.allowed_valid_states.insert(v.get<int>());
      }
    }
    if (f.contains("doppler_states")) {
      cfg.filter.allowed_doppler_states.clear();
      for (const auto& v : f.at("doppler_states")) {
        cfg.filter.allowed_doppler_states.insert(v.get<int>());
      }
    }
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::maybe(g, "x_min", cfg.x_min);
    detail::maybe(g, "x_max", cfg.x_max);
    detail::maybe(g, "y_min", cfg.y_min);
    detail::maybe(g, "y_max", cfg.y_max);
    detail::maybe(g, "fused_cell", cfg.fused_cell);
  }
  if (j.contains("radar")) {
    detail::maybe(j.at("radar"), "temporal_decay", cfg.temporal_decay);
  }
  if (j.contains("heatmap")) {
    detail::maybe(j.at("heatmap"), "tau", cfg.heatmap_tau);
    detail::maybe(j.at("heatmap"), "footprint_divisor",
                  cfg.gt_heat.footprint_divisor);
    detail::maybe(j.at("heatmap"), "min_sigma_cells",
                  cfg.gt_heat.min_sigma_cells);
  }
  if (j.contains("frustum")) {
    const auto& f = j.at("frustum");
    detail::maybe(f, "stride", cfg.frustum_stride);
    detail::maybe(f, "depth_min", cfg.depth_min);
    detail::maybe(f, "depth_max", cfg.depth_max);
    detail::maybe(f, "depth_step", cfg.depth_step);
    detail::maybe(f, "feature_amplitude", cfg.feature_amplitude);
  }
  if (j.contains("decode")) {
    const auto& d = j.at("decode");
    detail::maybe(d, "score_threshold", cfg.decode.score_threshold);
    detail::maybe_set_int(d, "max_detections", cfg.decode.max_detections);
    detail::maybe(d, "yaw_bin_centers", cfg.decode.yaw_bin_centers);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::maybe(e, "dist_thresholds", cfg.dist_thresholds);
    detail::maybe(e, "tp_threshold", cfg.tp_threshold);
  }
  if (j.contains("kernels")) {
    const auto& k = j.at("kernels");
    detail::maybe(k, "point_fusion", cfg.point_fusion_kernel_path);
    detail::maybe(k, "predict", cfg.predict_kernel_path);
    detail::maybe(k, "roi", cfg.roi_kernel_path);
  }
  return cfg;
}

}  // namespace bevfuse
