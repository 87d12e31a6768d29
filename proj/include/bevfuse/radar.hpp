#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "bevfuse/errors.hpp"
#include "bevfuse/geometry.hpp"
#include "bevfuse/grid.hpp"

namespace bevfuse {

// One radar return in the sensor frame at measurement time. Positions and
// velocities are planar (the sensor reports no height); status codes are
// vendor-style small integers; the *_rms fields are per-quantity noise
// estimates in the same units as the quantity.
struct RadarPoint {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double rcs = 0.0;       // reflector strength, dB-scale
  int valid_state = 0;    // 0 = fully valid return
  int doppler_state = 0;  // ambiguity resolution status; 3 = unambiguous
  int false_alarm = 0;    // false-alarm probability bucket, higher = worse
  double x_rms = 0.0;
  double y_rms = 0.0;
  double vx_rms = 0.0;
  double vy_rms = 0.0;
  int sweep_index = 0;  // 0 = reference sweep, k = k sweeps older
};

// One radar sweep: the returns plus the poses needed to carry them into
// another sweep's frame. timestamps must be non-increasing across a window
// ordered from newest to oldest.
struct SweepFrame {
  double timestamp = 0.0;
  std::vector<RadarPoint> points;
  RigidTransform radar_to_ego;   // mounting calibration at this sweep
  RigidTransform ego_to_global;  // odometry at this sweep
};

// Acceptance thresholds for raw returns. Defaults keep confirmed,
// unambiguous-Doppler returns of at least -10 dB with a low false-alarm
// bucket.
struct FilterConfig {
  double min_rcs = -10.0;
  std::set<int> allowed_valid_states = {0};
  std::set<int> allowed_doppler_states = {3};
  int max_false_alarm = 2;

  void validate() const {
    if (allowed_valid_states.empty() || allowed_doppler_states.empty()) {
      throw ValidationError("allowed state sets must not be empty");
    }
  }
};

namespace detail {

inline bool has_nan_fields(const RadarPoint& p) {
  return std::isnan(p.x) || std::isnan(p.y) || std::isnan(p.vx) ||
         std::isnan(p.vy) || std::isnan(p.rcs) || std::isnan(p.x_rms) ||
         std::isnan(p.y_rms) || std::isnan(p.vx_rms) || std::isnan(p.vy_rms);
}

}  // namespace detail

// Keeps points passing all four predicates; order is preserved. Points
// carrying NaN in any numeric field are dropped before the predicates run.
inline std::vector<RadarPoint> clutter_filter(
    const std::vector<RadarPoint>& points, const FilterConfig& cfg) {
  cfg.validate();
  std::vector<RadarPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (detail::has_nan_fields(p)) continue;
    if (p.rcs < cfg.min_rcs) continue;
    if (!cfg.allowed_valid_states.count(p.valid_state)) continue;
    if (!cfg.allowed_doppler_states.count(p.doppler_state)) continue;
    if (p.false_alarm > cfg.max_false_alarm) continue;
    out.push_back(p);
  }
  return out;
}

// Pose pair anchoring the reference sweep: the sensor frame everything is
// accumulated into, and the ego odometry at that same timestamp.
struct ReferencePose {
  RigidTransform ref_from_ego;   // reference sensor <- ego
  RigidTransform ego_to_global;  // ego odometry at the reference time
};

// Filters each sweep, then maps its survivors into the reference sensor
// frame through the odometry chain. frames[0] is the newest sweep; the
// output tags each point with its source index via sweep_index and
// concatenates in frame order, preserving per-frame point order.
// Velocities are direction-like: they rotate but do not translate.
inline std::vector<RadarPoint> accumulate_sweeps(
    const std::vector<SweepFrame>& frames, const ReferencePose& ref,
    const FilterConfig& cfg) {
  if (frames.empty()) {
    throw EmptyWindow("sweep accumulation needs at least one frame");
  }
  for (std::size_t k = 1; k < frames.size(); ++k) {
    if (frames[k].timestamp > frames[k - 1].timestamp) {
      throw ValidationError("sweeps must be ordered newest to oldest");
    }
  }
  std::vector<RadarPoint> out;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& frame = frames[k];
    const RigidTransform chain =
        chain_sweep_transform(frame.radar_to_ego, frame.ego_to_global,
                              ref.ego_to_global, ref.ref_from_ego);
    for (const auto& p : clutter_filter(frame.points, cfg)) {
      const Eigen::Vector3d pos =
          chain.apply(Eigen::Vector3d(p.x, p.y, 0.0));
      const Eigen::Vector3d vel =
          chain.rotate(Eigen::Vector3d(p.vx, p.vy, 0.0));
      RadarPoint q = p;
      q.x = pos.x();
      q.y = pos.y();
      q.vx = vel.x();
      q.vy = vel.y();
      q.sweep_index = static_cast<int>(k);
      out.push_back(q);
    }
  }
  return out;
}

// Pillar summary of a point set. Output always has six channels:
// mean x, mean y, mean vx, mean vy, mean rcs, count. Points outside the
// extent are ignored. spec supplies the raster only; its channel count is
// not consulted.
inline constexpr int kVoxelChannels = 6;

inline BevGrid voxelize(const std::vector<RadarPoint>& points,
                        const GridSpec& spec) {
  GridSpec out_spec = spec;
  out_spec.channels = kVoxelChannels;
  out_spec.validate();
  BevGrid out(out_spec);
  for (const auto& p : points) {
    const auto cell = world_to_cell(out_spec, p.x, p.y);
    if (!cell) continue;
    out.at(cell->row, cell->col, 0) += p.x;
    out.at(cell->row, cell->col, 1) += p.y;
    out.at(cell->row, cell->col, 2) += p.vx;
    out.at(cell->row, cell->col, 3) += p.vy;
    out.at(cell->row, cell->col, 4) += p.rcs;
    out.at(cell->row, cell->col, 5) += 1.0;
  }
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      const double n = out.at(r, c, 5);
      if (n > 0.0) {
        for (int ch = 0; ch < 5; ++ch) out.at(r, c, ch) /= n;
      }
    }
  }
  return out;
}

// Exponentially-decayed weighted mean over per-sweep grids: cells receive
// sum(decay^k * grid_k) / sum(decay^k), with the normalizer summed over all
// supplied grids regardless of content. Keyed by sweep age k; the result is
// invariant to input order.
inline BevGrid temporal_merge(
    const std::vector<std::pair<int, BevGrid>>& grids, double decay) {
  if (grids.empty()) {
    throw EmptyWindow("temporal merge needs at least one grid");
  }
  if (!(decay > 0.0) || decay > 1.0) {
    throw ValidationError("decay must be in (0, 1]");
  }
  const GridSpec& spec = grids.front().second.spec();
  double total_weight = 0.0;
  BevGrid out(spec);
  // Accumulate in ascending key order so the result is independent of the
  // order grids were supplied in (bit-for-bit when keys are distinct).
  std::vector<std::size_t> order(grids.size());
  for (std::size_t i = 0; i < grids.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (grids[a].first != grids[b].first) {
      return grids[a].first < grids[b].first;
    }
    return a < b;
  });
  for (std::size_t i : order) {
    const auto& [k, grid] = grids[i];
    if (k < 0) throw ValidationError("sweep key must be non-negative");
    if (!grid.spec().same_raster(spec) ||
        grid.spec().channels != spec.channels) {
      throw MismatchedGrids("temporal merge requires identical grid specs");
    }
    const double w = std::pow(decay, k);
    total_weight += w;
    for (std::size_t j = 0; j < out.data().size(); ++j) {
      out.data()[j] += w * grid.data()[j];
    }
  }
  for (double& v : out.data()) v /= total_weight;
  return out;
}

}  // namespace bevfuse
