#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "bevfuse/box.hpp"
#include "bevfuse/errors.hpp"
#include "bevfuse/geometry.hpp"
#include "bevfuse/radar.hpp"
#include "bevfuse/rng.hpp"
#include "bevfuse/view_transform.hpp"

namespace bevfuse::synth {

// Nominal object templates: BEV footprint, height, echo strength and the
// label a perfect attribute classifier would emit.
struct ClassTemplate {
  std::string name;
  double width;
  double length;
  double height;
  double rcs;
  std::string attribute;
};

inline const std::vector<ClassTemplate>& class_templates() {
  static const std::vector<ClassTemplate> t = {
      {"car", 1.9, 4.6, 1.7, 10.0, "vehicle.parked"},
      {"truck", 2.5, 6.5, 2.8, 15.0, "vehicle.parked"},
      {"bus", 2.9, 11.0, 3.4, 18.0, "vehicle.parked"},
      {"pedestrian", 0.7, 0.7, 1.8, 2.0, "pedestrian.standing"},
      {"bicycle", 0.6, 1.8, 1.4, 5.0, "cycle.without_rider"},
  };
  return t;
}

// Everything that defines a scene. Generation is a pure function of this
// struct: identical configs give bit-identical scenes.
struct SceneConfig {
  std::uint64_t seed = 1;
  int num_frames = 3;        // sweeps, newest first; frame 0 is the keyframe
  double sweep_period = 0.5; // seconds between sweeps
  double ego_speed = 5.0;    // m/s along the ego heading
  double ego_yaw_rate = 0.0; // rad/s
  int num_objects = 5;
  std::vector<std::string> classes = {"car", "truck", "bus", "pedestrian",
                                      "bicycle"};
  // Placement region in the reference (keyframe front-radar) frame.
  double place_x_min = 12.0;
  double place_x_max = 30.0;
  double place_y_min = -10.0;
  double place_y_max = 10.0;
  double min_separation = 4.0;
  double max_object_speed = 0.0;  // m/s; 0 keeps the scene static
  double size_jitter = 0.1;       // relative, +/-
  // Measurement noise (standard deviations); zero means exact returns.
  double position_noise = 0.0;
  double velocity_noise = 0.0;
  double rcs_noise = 0.0;
  // Expected spurious returns per frame; they carry codes that fail every
  // clutter-filter predicate under the default thresholds.
  double clutter_rate = 0.0;
  double clutter_x_min = 0.0;
  double clutter_x_max = 45.0;
  double clutter_y_min = -22.0;
  double clutter_y_max = 22.0;
  // Sampling density along box perimeters.
  double perimeter_step = 0.5;
  double base_rms = 0.2;
  // Sensor mounts on the ego body (translations; rotations identity except
  // the camera's axis permutation).
  Eigen::Vector3d radar_mount = {3.0, 0.0, 0.5};
  Eigen::Vector3d camera_mount = {1.0, 0.0, 1.2};
  double camera_focal = 192.0;
  int camera_width = 384;
  int camera_height = 24;

  void validate() const {
    if (num_frames < 1) throw ValidationError("need at least one frame");
    if (!(sweep_period > 0.0)) throw ValidationError("sweep period must be > 0");
    if (num_objects < 0) throw ValidationError("negative object count");
    if (classes.empty()) throw ValidationError("no object classes configured");
    if (!(perimeter_step > 0.0)) throw ValidationError("bad perimeter step");
    if (!(place_x_max > place_x_min) || !(place_y_max > place_y_min)) {
      throw ValidationError("empty placement region");
    }
  }
};

struct Scene {
  std::vector<SweepFrame> frames;  // newest first
  std::vector<Box3D> gt_boxes;     // keyframe annotations, reference frame
  std::vector<CameraModel> cameras;
  ReferencePose ref_pose;
};

namespace detail {

// Ego pose at time t for constant speed and yaw rate, starting at the
// global origin heading +x.
inline RigidTransform ego_pose_at(double t, double speed, double yaw_rate) {
  double x, y;
  if (std::abs(yaw_rate) < 1e-12) {
    x = speed * t;
    y = 0.0;
  } else {
    x = speed / yaw_rate * std::sin(yaw_rate * t);
    y = speed / yaw_rate * (1.0 - std::cos(yaw_rate * t));
  }
  return RigidTransform::from_yaw(yaw_rate * t, Eigen::Vector3d(x, y, 0.0));
}

// BEV perimeter of an oriented box, walked edge by edge at roughly the
// requested step. Corners appear once; the walk order is deterministic.
inline std::vector<Eigen::Vector2d> perimeter_points(double cx, double cy,
                                                     double width,
                                                     double length, double yaw,
                                                     double step) {
  const double hw = width / 2.0;
  const double hl = length / 2.0;
  const Eigen::Vector2d corners[4] = {
      {hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  std::vector<Eigen::Vector2d> out;
  for (int e = 0; e < 4; ++e) {
    const Eigen::Vector2d a = corners[e];
    const Eigen::Vector2d b = corners[(e + 1) % 4];
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d local = a + (b - a) * (static_cast<double>(i) / n);
      out.emplace_back(cx + c * local.x() - s * local.y(),
                       cy + s * local.x() + c * local.y());
    }
  }
  return out;
}

}  // namespace detail

// Builds the multi-sweep scene: static or slowly moving boxes observed by a
// front radar (perimeter returns) and a forward camera. Object placement,
// sizes and headings come from one generator stream seeded by cfg.seed;
// clutter uses an independent stream so enabling it never disturbs the
// object draw. All object returns carry codes accepted by the default
// clutter filter; clutter returns fail all four predicates.
inline Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(cfg.seed);
  SplitMix64 clutter_rng(cfg.seed ^ 0x5EEDC1A77E12ULL);

  Scene scene;
  const double t_key = (cfg.num_frames - 1) * cfg.sweep_period;
  const RigidTransform radar_to_ego =
      RigidTransform(Eigen::Matrix3d::Identity(), cfg.radar_mount);
  const RigidTransform ego_key =
      detail::ego_pose_at(t_key, cfg.ego_speed, cfg.ego_yaw_rate);
  scene.ref_pose.ref_from_ego = invert(radar_to_ego);
  scene.ref_pose.ego_to_global = ego_key;
  const RigidTransform ref_to_global = compose(ego_key, radar_to_ego);

  // Object draw, all in the reference frame at the keyframe.
  struct Object {
    ClassTemplate tpl;
    Eigen::Vector2d pos_ref;
    Eigen::Vector2d vel_ref;
    double yaw_ref;
    double width, length, height;
  };
  std::vector<Object> objects;
  for (int i = 0; i < cfg.num_objects; ++i) {
    const ClassTemplate* tpl = nullptr;
    for (const auto& t : class_templates()) {
      if (t.name == cfg.classes[i % cfg.classes.size()]) tpl = &t;
    }
    if (!tpl) {
      throw ValidationError("no template for class " +
                            cfg.classes[i % cfg.classes.size()]);
    }
    Eigen::Vector2d pos;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      pos.x() = rng.uniform(cfg.place_x_min, cfg.place_x_max);
      pos.y() = rng.uniform(cfg.place_y_min, cfg.place_y_max);
      placed = true;
      for (const auto& o : objects) {
        if ((o.pos_ref - pos).norm() < cfg.min_separation) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) {
      throw ValidationError("could not place objects with the requested "
                            "separation; shrink count or separation");
    }
    Object obj;
    obj.tpl = *tpl;
    obj.pos_ref = pos;
    obj.yaw_ref = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double jitter = 1.0 + rng.uniform(-cfg.size_jitter, cfg.size_jitter);
    obj.width = tpl->width * jitter;
    obj.length = tpl->length * jitter;
    obj.height = tpl->height * jitter;
    if (cfg.max_object_speed > 0.0) {
      const double speed = rng.uniform(0.0, cfg.max_object_speed);
      const double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
      obj.vel_ref = {speed * std::cos(heading), speed * std::sin(heading)};
    } else {
      obj.vel_ref = Eigen::Vector2d::Zero();
    }
    objects.push_back(obj);

    Box3D box;
    box.center = {pos.x(), pos.y(),
                  obj.height / 2.0 - cfg.radar_mount.z()};
    box.size = {obj.width, obj.length, obj.height};
    box.yaw = obj.yaw_ref;
    box.velocity = obj.vel_ref;
    box.class_name = tpl->name;
    box.attribute = tpl->attribute;
    scene.gt_boxes.push_back(box);
  }

  // Sweeps, newest first. Each frame re-derives the same perimeter points
  // from the object state at its timestamp and expresses them in that
  // frame's radar coordinates.
  for (int k = 0; k < cfg.num_frames; ++k) {
    const double t = t_key - k * cfg.sweep_period;
    SweepFrame frame;
    frame.timestamp = t;
    frame.radar_to_ego = radar_to_ego;
    frame.ego_to_global =
        detail::ego_pose_at(t, cfg.ego_speed, cfg.ego_yaw_rate);
    const RigidTransform meas_from_global =
        invert(compose(frame.ego_to_global, radar_to_ego));
    for (const auto& obj : objects) {
      // Object state in the global frame at this sweep's time.
      const Eigen::Vector3d center_ref(obj.pos_ref.x(), obj.pos_ref.y(), 0.0);
      const Eigen::Vector3d vel_ref(obj.vel_ref.x(), obj.vel_ref.y(), 0.0);
      const Eigen::Vector3d center_g0 = ref_to_global.apply(center_ref);
      const Eigen::Vector3d vel_g = ref_to_global.rotate(vel_ref);
      const Eigen::Vector3d center_g = center_g0 + vel_g * (t - t_key);
      const double yaw_g =
          obj.yaw_ref + std::atan2(ref_to_global.rotation()(1, 0),
                                   ref_to_global.rotation()(0, 0));
      for (const auto& pp : detail::perimeter_points(
               center_g.x(), center_g.y(), obj.width, obj.length, yaw_g,
               cfg.perimeter_step)) {
        // Radar returns live in the sensor's plane: z is the mount height.
        const Eigen::Vector3d p_meas = meas_from_global.apply(
            Eigen::Vector3d(pp.x(), pp.y(), cfg.radar_mount.z()));
        const Eigen::Vector3d v_meas = meas_from_global.rotate(vel_g);
        RadarPoint pt;
        pt.x = p_meas.x() + (cfg.position_noise > 0.0
                                 ? rng.gaussian(cfg.position_noise) : 0.0);
        pt.y = p_meas.y() + (cfg.position_noise > 0.0
                                 ? rng.gaussian(cfg.position_noise) : 0.0);
        pt.vx = v_meas.x() + (cfg.velocity_noise > 0.0
                                  ? rng.gaussian(cfg.velocity_noise) : 0.0);
        pt.vy = v_meas.y() + (cfg.velocity_noise > 0.0
                                  ? rng.gaussian(cfg.velocity_noise) : 0.0);
        pt.rcs = obj.tpl.rcs + (cfg.rcs_noise > 0.0
                                    ? rng.gaussian(cfg.rcs_noise) : 0.0);
        pt.valid_state = 0;
        pt.doppler_state = 3;
        pt.false_alarm = 0;
        pt.x_rms = cfg.base_rms;
        pt.y_rms = cfg.base_rms;
        pt.vx_rms = cfg.base_rms;
        pt.vy_rms = cfg.base_rms;
        pt.sweep_index = k;
        frame.points.push_back(pt);
      }
    }
    if (cfg.clutter_rate > 0.0) {
      const int n = clutter_rng.poisson(cfg.clutter_rate);
      for (int i = 0; i < n; ++i) {
        RadarPoint pt;
        pt.x = clutter_rng.uniform(cfg.clutter_x_min, cfg.clutter_x_max);
        pt.y = clutter_rng.uniform(cfg.clutter_y_min, cfg.clutter_y_max);
        pt.vx = clutter_rng.uniform(-3.0, 3.0);
        pt.vy = clutter_rng.uniform(-3.0, 3.0);
        pt.rcs = -20.0;      // below any sane threshold
        pt.valid_state = 1;  // invalid
        pt.doppler_state = 0;  // ambiguous
        pt.false_alarm = 3;  // worst bucket
        pt.x_rms = cfg.base_rms;
        pt.y_rms = cfg.base_rms;
        pt.vx_rms = cfg.base_rms;
        pt.vy_rms = cfg.base_rms;
        pt.sweep_index = k;
        frame.points.push_back(pt);
      }
    }
    scene.frames.push_back(frame);
  }

  // Forward camera: +x_ego is the optical axis, image x runs along -y_ego,
  // image y along -z_ego.
  CameraModel cam;
  cam.width = cfg.camera_width;
  cam.height = cfg.camera_height;
  cam.intrinsics << cfg.camera_focal, 0.0, cfg.camera_width / 2.0,
      0.0, cfg.camera_focal, cfg.camera_height / 2.0,
      0.0, 0.0, 1.0;
  Eigen::Matrix3d r_ego_from_cam;
  r_ego_from_cam.col(0) = Eigen::Vector3d(0.0, -1.0, 0.0);  // camera x
  r_ego_from_cam.col(1) = Eigen::Vector3d(0.0, 0.0, -1.0);  // camera y
  r_ego_from_cam.col(2) = Eigen::Vector3d(1.0, 0.0, 0.0);   // camera z
  const RigidTransform ego_from_cam(r_ego_from_cam, cfg.camera_mount);
  // camera <- reference = (camera <- ego) * (ego <- reference sensor)
  cam.extrinsics = compose(invert(ego_from_cam), radar_to_ego);
  scene.cameras.push_back(cam);
  return scene;
}

// Stand-in for a trained image backbone: every ground-truth box contributes
// a one-hot class feature of the given amplitude at one frustum lattice
// point, with the depth logit spiked on the matching bin. The lattice point
// is chosen among nearby (column, bin) candidates so the resulting ray lands
// in the same BEV cell as the true center (cell size `snap_cell`), as close
// to the center as possible; pixels are never reused while an unused
// candidate remains. Background stays zero.
inline ImageFeatureMap ideal_image_observation(
    const Scene& scene, const CameraModel& cam, const FrustumSpec& fr,
    const ClassMap& classes, double amplitude, double snap_cell) {
  if (!(snap_cell > 0.0)) throw ValidationError("snap cell must be > 0");
  ImageFeatureMap fm;
  fm.rows = fr.rows;
  fm.cols = fr.cols;
  fm.stride = fr.stride;
  fm.features = Tensor3(fr.rows, fr.cols, classes.size());
  fm.depth_logits = Tensor3(fr.rows, fr.cols,
                            static_cast<int>(fr.depth_bins.size()));
  const RigidTransform ref_from_cam = invert(cam.extrinsics);
  const Eigen::Matrix3d k_inv = cam.intrinsics.inverse();
  std::vector<std::vector<bool>> used(
      fr.rows, std::vector<bool>(fr.cols, false));

  for (const auto& box : scene.gt_boxes) {
    const PixelDepth pd = project_to_image(cam, box.center);
    const int h0 = std::clamp(
        static_cast<int>(std::llround(pd.v / fr.stride - 0.5)), 0,
        fr.rows - 1);
    const int w0 = std::clamp(
        static_cast<int>(std::llround(pd.u / fr.stride - 0.5)), 0,
        fr.cols - 1);
    int d0 = 0;
    for (int d = 1; d < static_cast<int>(fr.depth_bins.size()); ++d) {
      if (std::abs(fr.depth_bins[d] - pd.depth) <
          std::abs(fr.depth_bins[d0] - pd.depth)) {
        d0 = d;
      }
    }
    struct Candidate {
      double dist;
      bool same_cell;
      int w, d;
    };
    std::vector<Candidate> cands;
    const auto center_cell_x =
        std::floor(box.center.x() / snap_cell);
    const auto center_cell_y =
        std::floor(box.center.y() / snap_cell);
    for (int dw = -3; dw <= 3; ++dw) {
      const int w = w0 + dw;
      if (w < 0 || w >= fr.cols) continue;
      for (int dd = -4; dd <= 4; ++dd) {
        const int d = d0 + dd;
        if (d < 0 || d >= static_cast<int>(fr.depth_bins.size())) continue;
        const double u = (w + 0.5) * fr.stride;
        const double v = (h0 + 0.5) * fr.stride;
        const Eigen::Vector3d dir = k_inv * Eigen::Vector3d(u, v, 1.0);
        const Eigen::Vector3d p = ref_from_cam.apply(dir * fr.depth_bins[d]);
        const double dx = p.x() - box.center.x();
        const double dy = p.y() - box.center.y();
        const bool same = std::floor(p.x() / snap_cell) == center_cell_x &&
                          std::floor(p.y() / snap_cell) == center_cell_y;
        cands.push_back({std::hypot(dx, dy), same, w, d});
      }
    }
    std::sort(cands.begin(), cands.end(),
              [](const Candidate& a, const Candidate& b) {
                if (a.same_cell != b.same_cell) return a.same_cell;
                if (a.dist != b.dist) return a.dist < b.dist;
                if (a.w != b.w) return a.w < b.w;
                return a.d < b.d;
              });
    const Candidate* pick = nullptr;
    for (const auto& c : cands) {
      if (!used[h0][c.w]) {
        pick = &c;
        break;
      }
    }
    if (!pick && !cands.empty()) pick = &cands.front();
    if (!pick) continue;
    used[h0][pick->w] = true;
    fm.features.at(h0, pick->w, classes.index_of(box.class_name)) += amplitude;
    fm.depth_logits.at(h0, pick->w, pick->d) += 30.0;
  }
  return fm;
}

}  // namespace bevfuse::synth
