// Release gate for the whole library. Each criterion below prints exactly
// one [PASS]/[FAIL] line with its wall time; the process exits nonzero if
// any of them fail. The checks favor independently derived references:
// closed forms, dense re-implementations from tests/oracles.hpp, exhaustive
// enumeration and finite differences.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "bevfuse/fusion.hpp"
#include "bevfuse/geometry.hpp"
#include "bevfuse/head.hpp"
#include "bevfuse/heatmap.hpp"
#include "bevfuse/io.hpp"
#include "bevfuse/metrics.hpp"
#include "bevfuse/pipeline.hpp"
#include "bevfuse/radar.hpp"
#include "bevfuse/rng.hpp"
#include "bevfuse/synth.hpp"
#include "bevfuse/view_transform.hpp"
#include "oracles.hpp"

namespace {

using namespace bevfuse;

struct Outcome {
  bool ok = true;
  std::string reason;  // first failure only
  std::string extra;   // appended to the line, e.g. measured worst cases

  void expect(bool cond, const std::string& why) {
    if (!cond && ok) {
      ok = false;
      reason = why;
    }
  }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// --------------------------------------------------------------------------
// 1. Composite detection score against three golden operating points.

void check_composite_goldens(Outcome& o) {
  struct Row {
    double map, mate, mase, maoe, mave, maae, want;
  };
  const Row rows[] = {
      {0.377, 0.534, 0.271, 0.558, 0.493, 0.209, 0.482},
      {0.308, 0.665, 0.273, 0.533, 0.829, 0.205, 0.403},
      {0.332, 0.649, 0.263, 0.535, 0.540, 0.142, 0.453},
  };
  double worst = 0.0;
  for (const Row& r : rows) {
    MeanTp mtp;
    mtp.mate = r.mate;
    mtp.mase = r.mase;
    mtp.maoe = r.maoe;
    mtp.mave = r.mave;
    mtp.maae = r.maae;
    const double got = nds(r.map, mtp);
    worst = std::max(worst, std::abs(got - r.want));
    // The goldens are quoted to three decimals, so half a thousandth is a
    // legal gap; the extra 1e-12 absorbs representation error when a row
    // lands exactly on that boundary (the second one is 0.4035).
    o.expect(std::abs(got - r.want) <= 5e-4 + 1e-12,
             "composite score " + fmt("%.6f", got) + " != " +
                 fmt("%.3f", r.want));
  }
  o.extra = "max |err| " + fmt("%.2e", worst);
}

// --------------------------------------------------------------------------
// 2. Measurement heatmap closed forms: peak value, 1 m falloff, hard zeros.

void check_heatmap_closed_forms(Outcome& o) {
  const GridSpec spec{-8.0, 8.0, -8.0, 8.0, 0.25, kRadarHeatmapChannels};
  RadarPoint p;
  p.x = 0.125;  // center of cell (32, 32)
  p.y = 0.125;
  p.rcs = 0.5;
  p.valid_state = 0;
  p.doppler_state = 3;
  p.false_alarm = 0;
  p.x_rms = 0.5;
  p.y_rms = 0.5;
  p.vx_rms = 0.5;
  p.vy_rms = 0.5;
  const BevGrid heat = radar_heatmap({p}, spec, RadarHeatmapConfig{1.0});

  const double peak = 1.0 / (2.0 * std::numbers::pi);
  for (int ch = 0; ch < kRadarHeatmapChannels; ++ch) {
    o.expect(std::abs(heat.at(32, 32, ch) - peak) <= 1e-9,
             "peak off on channel " + std::to_string(ch));
  }
  const double at_1m = std::exp(-0.5) / (2.0 * std::numbers::pi);
  o.expect(std::abs(heat.at(36, 32, 0) - at_1m) <= 1e-9,
           "value one meter from the return is off");
  o.expect(std::abs(heat.at(32, 36, 1) - at_1m) <= 1e-9,
           "value one meter across is off");

  int zeros = 0, touched = 0;
  for (int r = 0; r < heat.rows(); ++r) {
    for (int c = 0; c < heat.cols(); ++c) {
      const auto [cx, cy] = cell_to_world(spec, r, c);
      const bool outside =
          std::abs(cx - p.x) > 3.0 || std::abs(cy - p.y) > 3.0;
      for (int ch = 0; ch < kRadarHeatmapChannels; ++ch) {
        if (outside) {
          ++zeros;
          o.expect(heat.at(r, c, ch) == 0.0,
                   "cell beyond the truncation window is not exactly zero");
        } else {
          ++touched;
          o.expect(heat.at(r, c, ch) > 0.0,
                   "cell inside the truncation window stayed zero");
        }
      }
    }
  }
  o.extra = std::to_string(zeros) + " hard zeros, " +
            std::to_string(touched) + " live cells";
}

// --------------------------------------------------------------------------
// 3. Rigid transform round trips and exact collapse of a static scene's
// accumulated sweeps.

void check_geometry_round_trips(Outcome& o) {
  SplitMix64 rng(2026);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double q[4];
    double norm = 0.0;
    for (double& v : q) {
      v = rng.gaussian();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    const Eigen::Vector3d t(rng.uniform(-20, 20), rng.uniform(-20, 20),
                            rng.uniform(-20, 20));
    const RigidTransform x = RigidTransform::from_quaternion(
        q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm, t);
    const Eigen::Vector3d p(rng.uniform(-50, 50), rng.uniform(-50, 50),
                            rng.uniform(-50, 50));
    const Eigen::Vector3d back = invert(x).apply(x.apply(p));
    const Eigen::Vector3d via_compose = compose(invert(x), x).apply(p);
    worst = std::max(worst, (back - p).norm());
    worst = std::max(worst, (via_compose - p).norm());
  }
  o.expect(worst <= 1e-9,
           "round trip drift " + fmt("%.2e", worst) + " exceeds 1e-9");

  // A static scene seen from a moving ego: each perimeter return must land
  // on exactly the same reference-frame coordinates in every sweep.
  synth::SceneConfig cfg;
  cfg.seed = 9;
  const synth::Scene scene = synth::generate_scene(cfg);
  const std::vector<RadarPoint> acc =
      accumulate_sweeps(scene.frames, scene.ref_pose, FilterConfig{});
  o.expect(acc.size() % cfg.num_frames == 0,
           "sweep sizes differ in a static scene");
  const std::size_t per = acc.size() / cfg.num_frames;
  double diameter = 0.0;
  for (int k = 1; k < cfg.num_frames; ++k) {
    for (std::size_t j = 0; j < per; ++j) {
      const double dx = acc[k * per + j].x - acc[j].x;
      const double dy = acc[k * per + j].y - acc[j].y;
      diameter = std::max(diameter, std::hypot(dx, dy));
    }
  }
  o.expect(diameter <= 1e-9,
           "static clusters have diameter " + fmt("%.2e", diameter));
  o.extra = "max drift " + fmt("%.2e", worst) + ", cluster diameter " +
            fmt("%.2e", diameter);
}

// --------------------------------------------------------------------------
// 4. Lift-splat conservation: per-pixel depth distributions sum features
// back to the input, and in-bounds splatting conserves total mass.

void check_lift_splat_conservation(Outcome& o) {
  SplitMix64 rng(44);
  double worst_sum = 0.0, worst_mass = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int rows = 1 + rng.uniform_int(4);
    const int cols = 1 + rng.uniform_int(4);
    const int bins = 1 + rng.uniform_int(5);
    const int channels = 1 + rng.uniform_int(3);

    ImageFeatureMap fm;
    fm.rows = rows;
    fm.cols = cols;
    fm.stride = 16.0;
    fm.features = Tensor3(rows, cols, channels);
    fm.depth_logits = Tensor3(rows, cols, bins);
    for (double& v : fm.features.v) v = rng.uniform(0.0, 2.0);
    for (double& v : fm.depth_logits.v) v = rng.uniform(-3.0, 3.0);

    std::vector<double> depth_bins;
    double depth = 1.0 + rng.uniform(0.0, 2.0);
    for (int d = 0; d < bins; ++d) {
      depth_bins.push_back(depth);
      depth += 0.5 + rng.uniform(0.0, 2.0);
    }

    CameraModel cam;
    cam.intrinsics = Eigen::Matrix3d::Identity();
    cam.intrinsics(0, 0) = 50.0 + rng.uniform(0.0, 100.0);
    cam.intrinsics(1, 1) = 50.0 + rng.uniform(0.0, 100.0);
    cam.intrinsics(0, 2) = cols * 8.0 + rng.uniform(-5.0, 5.0);
    cam.intrinsics(1, 2) = rows * 8.0 + rng.uniform(-5.0, 5.0);
    cam.width = cols * 16;
    cam.height = rows * 16;
    const RigidTransform ref_from_cam = RigidTransform::from_yaw(
        rng.uniform(-std::numbers::pi, std::numbers::pi),
        Eigen::Vector3d(rng.uniform(-3, 3), rng.uniform(-3, 3),
                        rng.uniform(-3, 3)));

    const Frustum f = make_frustum(fm, cam, depth_bins, ref_from_cam);

    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        for (int c = 0; c < channels; ++c) {
          double sum = 0.0;
          for (int d = 0; d < bins; ++d) sum += f.features.at(i, j, d, c);
          const double want = fm.features.at(i, j, c);
          const double err = std::abs(sum - want) / std::max(1.0, want);
          worst_sum = std::max(worst_sum, err);
        }
      }
    }
    o.expect(worst_sum <= 1e-12, "depth distribution does not sum features "
                                 "back to the image plane");

    const GridSpec spec{-64.0, 64.0, -64.0, 64.0, 0.5, channels};
    for (std::size_t i = 0; i + 2 < f.points.v.size(); i += 3) {
      const double x = f.points.v[i], y = f.points.v[i + 1];
      o.expect(x > spec.x_min && x < spec.x_max && y > spec.y_min &&
                   y < spec.y_max,
               "a ray left the test extent, mass check void");
    }
    const BevGrid bev = splat_to_bev(f, spec);
    double mass_in = 0.0, mass_out = 0.0;
    for (const double v : f.features.v) mass_in += v;
    for (const double v : bev.data()) mass_out += v;
    const double err = std::abs(mass_in - mass_out) / std::max(1.0, mass_in);
    worst_mass = std::max(worst_mass, err);
    o.expect(err <= 1e-9, "splat lost feature mass");
  }
  o.extra = "worst depth-sum err " + fmt("%.2e", worst_sum) +
            ", worst mass err " + fmt("%.2e", worst_mass);
}

// --------------------------------------------------------------------------
// 5. Classification and regression losses against finite differences, plus
// the half-confidence closed form.

void check_loss_gradients(Outcome& o) {
  {
    const GridSpec one{0.0, 1.0, 0.0, 1.0, 1.0, 1};
    BevGrid pred(one), gt(one);
    pred.at(0, 0, 0) = 0.5;
    gt.at(0, 0, 0) = 1.0;
    const double v = focal_loss(pred, gt).value;
    o.expect(std::abs(v - 0.17329) <= 1e-5,
             "half-confidence closed form is " + fmt("%.6f", v));
  }

  SplitMix64 rng(55);
  double worst = 0.0;
  int probes = 0, skipped = 0;

  for (int instance = 0; instance < 50; ++instance) {
    // Classification: 3 x 3 x 2 grids away from the clamp bounds.
    const GridSpec spec{0.0, 3.0, 0.0, 3.0, 1.0, 2};
    BevGrid pred(spec), gt(spec);
    for (double& v : pred.data()) v = rng.uniform(0.02, 0.98);
    for (double& v : gt.data()) v = rng.uniform(0.0, 1.0);
    gt.data()[rng.uniform_int(static_cast<int>(gt.data().size()))] = 1.0;
    FocalConfig fc;
    fc.variant = (instance % 2 == 0) ? FocalVariant::kAsPrinted
                                     : FocalVariant::kConventional;
    const FocalResult res = focal_loss(pred, gt, fc);
    for (std::size_t i = 0; i < pred.data().size(); ++i) {
      const double x0 = pred.data()[i];
      const double fd = oracles::central_diff(
          [&](double x) {
            BevGrid probe = pred;
            probe.data()[i] = x;
            return focal_loss(probe, gt, fc).value;
          },
          x0);
      // Floor the denominator at 1e-5: cells whose gradient is itself at
      // the 1e-7 scale agree with finite differences to ~1e-11 absolutely,
      // but a relative comparison there only measures FD roundoff.
      const double err = oracles::rel_err(fd, res.grad.data()[i], 1e-5);
      worst = std::max(worst, err);
      ++probes;
    }

    // Regression: two-sample batches with all kinks kept at arm's length.
    const std::vector<double> centers{0.0, std::numbers::pi};
    RegLossConfig rc;
    rc.yaw_bin_centers = centers;
    rc.lambda_offset = 1.5;
    rc.lambda_dims = 0.5;
    rc.lambda_velocity = 2.0;
    rc.lambda_rotation = 1.25;
    rc.lambda_attributes = 0.75;
    std::vector<ObjectTarget> preds(2), gts(2);
    for (int s = 0; s < 2; ++s) {
      ObjectTarget& g = gts[s];
      ObjectTarget& p = preds[s];
      g = ObjectTarget::zeros(2, 2);
      p = ObjectTarget::zeros(2, 2);
      auto fill_l1 = [&](std::vector<double>& gv, std::vector<double>& pv) {
        for (std::size_t i = 0; i < gv.size(); ++i) {
          gv[i] = rng.uniform(-1.0, 1.0);
          const double gap = 0.05 + rng.uniform(0.0, 0.5);
          pv[i] = gv[i] + (rng.uniform() < 0.5 ? -gap : gap);
        }
      };
      fill_l1(g.offset, p.offset);
      fill_l1(g.dims, p.dims);
      fill_l1(g.velocity, p.velocity);
      g.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      g.yaw_bin = rng.uniform_int(2);
      for (int b = 0; b < 2; ++b) {
        g.bin_residuals[b] = wrap_angle(g.yaw - centers[b]);
        p.bin_logits[b] = rng.uniform(-2.0, 2.0);
        p.bin_residuals[b] = rng.uniform(-1.0, 1.0);
        g.attributes[b] = rng.uniform() < 0.5 ? 0.0 : 1.0;
        p.attributes[b] = rng.uniform(0.05, 0.95);
      }
    }
    const RegLossResult res_reg = reg_losses(preds, gts, rc);
    auto probe = [&](std::vector<double> ObjectTarget::*field, bool l1) {
      for (int s = 0; s < 2; ++s) {
        const auto& pv = preds[s].*field;
        for (std::size_t i = 0; i < pv.size(); ++i) {
          if (l1 && std::abs(pv[i] - (gts[s].*field)[i]) < 1e-6) {
            ++skipped;
            continue;
          }
          const double fd = oracles::central_diff(
              [&](double x) {
                std::vector<ObjectTarget> shifted = preds;
                (shifted[s].*field)[i] = x;
                return reg_losses(shifted, gts, rc).total;
              },
              pv[i]);
          const double an = (res_reg.grads[s].*field)[i];
          worst = std::max(worst, oracles::rel_err(fd, an, 1e-5));
          ++probes;
        }
      }
    };
    probe(&ObjectTarget::offset, true);
    probe(&ObjectTarget::dims, true);
    probe(&ObjectTarget::velocity, true);
    probe(&ObjectTarget::bin_logits, false);
    probe(&ObjectTarget::bin_residuals, false);
    probe(&ObjectTarget::attributes, false);
  }
  o.expect(worst <= 1e-4,
           "finite differences disagree by " + fmt("%.2e", worst));
  o.extra = std::to_string(probes) + " probes, " + std::to_string(skipped) +
            " kinks skipped, worst rel err " + fmt("%.2e", worst);
}

// --------------------------------------------------------------------------
// 6. Average precision against an exhaustive reference over every small
// prediction/annotation configuration.

void check_average_precision_exhaustive(Outcome& o) {
  const double xs[3] = {0.0, 0.7, 3.0};
  const char* names[2] = {"car", "truck"};

  auto make_box = [&](int option, double score) {
    Box3D b;
    b.center = {xs[option % 3], 0.0, 0.0};
    b.size = {1.0, 1.0, 1.0};
    b.class_name = names[option / 3];
    b.score = score;
    return b;
  };

  std::vector<std::vector<Box3D>> pred_sets, gt_sets;
  for (int n = 0; n <= 4; ++n) {
    int combos = 1;
    for (int i = 0; i < n; ++i) combos *= 6;
    for (int code = 0; code < combos; ++code) {
      std::vector<Box3D> set;
      int rest = code;
      for (int i = 0; i < n; ++i) {
        set.push_back(make_box(rest % 6, 0.9 - 0.1 * i));
        rest /= 6;
      }
      pred_sets.push_back(std::move(set));
      if (n <= 3) {
        std::vector<Box3D> gts;
        rest = code;
        for (int i = 0; i < n; ++i) {
          gts.push_back(make_box(rest % 6, 0.0));
          rest /= 6;
        }
        gt_sets.push_back(std::move(gts));
      }
    }
  }
  o.expect(pred_sets.size() == 1555, "prediction enumeration is off");
  o.expect(gt_sets.size() == 259, "annotation enumeration is off");

  const double thresholds[3] = {0.7, 1.0, 4.0};
  double worst_ap = 0.0;
  double worst_ratio = 1.0;
  long long checked = 0;
  for (const auto& preds : pred_sets) {
    for (const auto& gts : gt_sets) {
      for (const double d : thresholds) {
        for (const char* cls : names) {
          const double got = average_precision(preds, gts, cls, d);
          const double want = oracles::ap(preds, gts, cls, d);
          worst_ap = std::max(worst_ap, std::abs(got - want));
          const int greedy = static_cast<int>(
              match_detections(preds, gts, cls, d).matches.size());
          const int best = oracles::max_matching(preds, gts, cls, d);
          if (best > 0) {
            worst_ratio = std::min(
                worst_ratio, static_cast<double>(greedy) / best);
          }
          o.expect(2 * greedy >= best,
                   "greedy matching fell below half the optimum");
          ++checked;
        }
      }
    }
  }
  o.expect(worst_ap <= 1e-12,
           "average precision drifted by " + fmt("%.2e", worst_ap));
  o.extra = std::to_string(checked) + " cases, max |dAP| " +
            fmt("%.2e", worst_ap) + ", min greedy/optimal " +
            fmt("%.2f", worst_ratio);
}

// --------------------------------------------------------------------------
// 7. Raster operators against their dense oracles on random inputs.

void check_raster_operators(Outcome& o) {
  SplitMix64 rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    // Convolution on a small random grid.
    {
      const GridSpec spec{0.0, 5.0, 0.0, 4.0, 0.5, 3};
      BevGrid grid(spec);
      for (double& v : grid.data()) v = rng.uniform(-2.0, 2.0);
      const int kh = 1 + 2 * rng.uniform_int(3);
      const int kw = 1 + 2 * rng.uniform_int(2);
      ConvKernel k = ConvKernel::zeros(kh, kw, 3, 2);
      for (double& v : k.weights) v = rng.uniform(-1.0, 1.0);
      for (double& v : k.bias) v = rng.uniform(-1.0, 1.0);
      const BevGrid got = conv2d(grid, k);
      const BevGrid want = oracles::conv(grid, k);
      for (std::size_t i = 0; i < got.data().size(); ++i) {
        worst = std::max(worst, std::abs(got.data()[i] - want.data()[i]));
      }
    }

    // Voxel statistics from scattered returns, some outside the extent.
    const GridSpec vox_spec{0.0, 6.0, -3.0, 3.0, 1.0, kVoxelChannels};
    std::vector<RadarPoint> points;
    const int n = 5 + rng.uniform_int(40);
    for (int i = 0; i < n; ++i) {
      RadarPoint p;
      p.x = rng.uniform(-1.0, 8.0);
      p.y = rng.uniform(-4.0, 4.0);
      p.vx = rng.uniform(-5.0, 5.0);
      p.vy = rng.uniform(-5.0, 5.0);
      p.rcs = rng.uniform(-10.0, 20.0);
      p.x_rms = rng.uniform(0.0, 2.0);
      p.y_rms = rng.uniform(0.0, 2.0);
      p.vx_rms = rng.uniform(0.0, 2.0);
      p.vy_rms = rng.uniform(0.0, 2.0);
      p.false_alarm = rng.uniform_int(4);
      points.push_back(p);
    }
    {
      const BevGrid got = voxelize(points, vox_spec);
      const BevGrid want = oracles::voxelize(points, vox_spec);
      for (std::size_t i = 0; i < got.data().size(); ++i) {
        worst = std::max(worst, std::abs(got.data()[i] - want.data()[i]));
      }
    }

    // Measurement heatmap on the same returns.
    {
      const GridSpec heat_spec{0.0, 6.0, -3.0, 3.0, 0.5,
                               kRadarHeatmapChannels};
      const BevGrid got =
          radar_heatmap(points, heat_spec, RadarHeatmapConfig{1.0});
      const BevGrid want =
          oracles::gaussian_heatmap(points, heat_spec, 1.0);
      for (std::size_t i = 0; i < got.data().size(); ++i) {
        worst = std::max(worst, std::abs(got.data()[i] - want.data()[i]));
      }
    }

    // Frustum splat against the plain scatter-add.
    {
      const int rows = 1 + rng.uniform_int(3);
      const int cols = 1 + rng.uniform_int(3);
      const int bins = 1 + rng.uniform_int(4);
      const int channels = 1 + rng.uniform_int(2);
      Frustum f;
      f.rows = rows;
      f.cols = cols;
      for (int d = 0; d < bins; ++d) f.depth_bins.push_back(1.0 + d);
      f.features = Tensor4(rows, cols, bins, channels);
      f.points = Tensor4(rows, cols, bins, 3);
      for (double& v : f.features.v) v = rng.uniform(-1.0, 1.0);
      for (int h = 0; h < rows; ++h) {
        for (int w = 0; w < cols; ++w) {
          for (int d = 0; d < bins; ++d) {
            f.points.at(h, w, d, 0) = rng.uniform(-2.0, 8.0);
            f.points.at(h, w, d, 1) = rng.uniform(-5.0, 5.0);
            f.points.at(h, w, d, 2) = rng.uniform(-1.0, 3.0);
          }
        }
      }
      const GridSpec spec{0.0, 6.0, -3.0, 3.0, 1.5, channels};
      const BevGrid got = splat_to_bev(f, spec);
      const BevGrid want = oracles::scatter(f, spec);
      for (std::size_t i = 0; i < got.data().size(); ++i) {
        worst = std::max(worst, std::abs(got.data()[i] - want.data()[i]));
      }
    }
  }
  o.expect(worst <= 1e-12,
           "a raster operator drifted by " + fmt("%.2e", worst));
  o.extra = "max |err| " + fmt("%.2e", worst);
}

// --------------------------------------------------------------------------
// 8. End-to-end quality on a clean scene, and insensitivity to clutter that
// the default acceptance thresholds are supposed to remove.

void check_end_to_end_quality(Outcome& o) {
  PipelineConfig cfg;
  cfg.scene.seed = 7;
  const PipelineArtifacts clean = run_pipeline(cfg);
  o.expect(clean.report.map > 0.9,
           "clean-scene mAP " + fmt("%.3f", clean.report.map) +
               " is not above 0.9");
  o.expect(clean.report.mtp.mate < cfg.fused_cell,
           "mean translation error " + fmt("%.3f", clean.report.mtp.mate) +
               " exceeds one cell");

  PipelineConfig noisy = cfg;
  noisy.scene.clutter_rate = 50.0;
  const PipelineArtifacts cluttered = run_pipeline(noisy);
  const double drop = std::abs(clean.report.map - cluttered.report.map);
  o.expect(drop < 0.05, "clutter at rate 50 moved mAP by " +
                            fmt("%.3f", drop));
  o.extra = "clean mAP " + fmt("%.3f", clean.report.map) + ", mATE " +
            fmt("%.3f", clean.report.mtp.mate) + ", clutter delta " +
            fmt("%.1e", drop);
}

// --------------------------------------------------------------------------
// 9. Bytewise determinism of the full pipeline report.

void check_report_determinism(Outcome& o) {
  PipelineConfig cfg;
  cfg.scene.seed = 7;
  const std::string a = io::canonical_dump(run_pipeline(cfg).report_json);
  const std::string b = io::canonical_dump(run_pipeline(cfg).report_json);
  o.expect(a == b, "two runs with one seed produced different reports");
  o.extra = std::to_string(a.size()) + " byte report";
}

struct Criterion {
  int index;
  const char* name;
  double budget_ms;  // 0 disables the timing check
  void (*run)(Outcome&);
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "composite score golden values", 1.0, check_composite_goldens},
      {2, "measurement heatmap closed forms", 0.0,
       check_heatmap_closed_forms},
      {3, "transform round trips and static sweep collapse", 1000.0,
       check_geometry_round_trips},
      {4, "lift-splat conservation", 5000.0, check_lift_splat_conservation},
      {5, "loss gradients vs finite differences", 0.0, check_loss_gradients},
      {6, "average precision vs exhaustive reference", 30000.0,
       check_average_precision_exhaustive},
      {7, "raster operators vs dense oracles", 0.0, check_raster_operators},
      {8, "end-to-end quality and clutter robustness", 10000.0,
       check_end_to_end_quality},
      {9, "bytewise report determinism", 0.0, check_report_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    Outcome outcome;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(outcome);
    } catch (const std::exception& e) {
      outcome.expect(false, std::string("threw: ") + e.what());
    }
    const double ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - start)
            .count();
    if (c.budget_ms > 0.0 && ms > c.budget_ms) {
      outcome.expect(false, "took " + fmt("%.1f", ms) + " ms, budget " +
                                fmt("%.0f", c.budget_ms) + " ms");
    }
    std::printf("[%s] criterion %d: %s (%.1f ms%s%s)\n",
                outcome.ok ? "PASS" : "FAIL", c.index, c.name, ms,
                outcome.extra.empty() ? "" : "; ",
                outcome.extra.c_str());
    if (!outcome.ok) {
      std::printf("       reason: %s\n", outcome.reason.c_str());
      ++failures;
    }
  }
  if (failures > 0) {
    std::printf("%d of 9 criteria failed\n", failures);
    return 1;
  }
  std::printf("all 9 criteria passed\n");
  return 0;
}
