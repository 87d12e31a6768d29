#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bevfuse/box.hpp"
#include "bevfuse/errors.hpp"
#include "bevfuse/grid.hpp"
#include "bevfuse/radar.hpp"

namespace bevfuse {

inline constexpr int kRadarHeatmapChannels = 6;

struct RadarHeatmapConfig {
  // Lower bound on the per-point kernel scale; keeps kernels from collapsing
  // below the raster resolution when a reported rms is tiny or zero.
  double tau = 1.0;
};

namespace detail {

// Scale used by one heatmap channel of one point. Channels 0..3 take their
// scale from the matching rms estimate; rcs and the false-alarm bucket have
// no rms, so the magnitude of the value itself is used.
inline double channel_scale(const RadarPoint& p, int ch, double tau) {
  double basis = 0.0;
  switch (ch) {
    case 0: basis = p.x_rms; break;
    case 1: basis = p.y_rms; break;
    case 2: basis = p.vx_rms; break;
    case 3: basis = p.vy_rms; break;
    case 4: basis = std::abs(p.rcs); break;
    case 5: basis = std::abs(static_cast<double>(p.false_alarm)); break;
    default: break;
  }
  return std::max(basis, tau);
}

}  // namespace detail

// Splats each point as a truncated isotropic Gaussian, one channel per
// measured quantity in the order [x, y, vx, vy, rcs, false_alarm]. For a
// scale s the cell at offset (dx, dy) from the point receives
// exp(-(dx^2 + dy^2) / (2 s)) / (2 pi s); cells whose center lies outside
// |dx| <= 3 s and |dy| <= 3 s on either axis are never touched and stay
// exactly zero. Overlapping points combine per cell by max, so the peak of
// an isolated point with s = 1 is exactly 1 / (2 pi). spec.channels must
// equal six.
inline BevGrid radar_heatmap(const std::vector<RadarPoint>& points,
                             const GridSpec& spec,
                             const RadarHeatmapConfig& cfg = {}) {
  if (spec.channels != kRadarHeatmapChannels) {
    throw ChannelMismatch("radar heatmap spec must declare 6 channels");
  }
  spec.validate();
  if (!(cfg.tau > 0.0)) throw ValidationError("tau must be > 0");
  BevGrid out(spec);
  const int rows = out.rows();
  const int cols = out.cols();
  for (const auto& p : points) {
    for (int ch = 0; ch < kRadarHeatmapChannels; ++ch) {
      const double s = detail::channel_scale(p, ch, cfg.tau);
      const double radius = 3.0 * s;
      const double norm = 1.0 / (2.0 * std::numbers::pi * s);
      // Candidate cell range; the |dx|,|dy| test below is the authority.
      int r_lo = static_cast<int>(
          std::floor((p.x - radius - spec.x_min) / spec.cell_size)) - 1;
      int r_hi = static_cast<int>(
          std::floor((p.x + radius - spec.x_min) / spec.cell_size)) + 1;
      int c_lo = static_cast<int>(
          std::floor((p.y - radius - spec.y_min) / spec.cell_size)) - 1;
      int c_hi = static_cast<int>(
          std::floor((p.y + radius - spec.y_min) / spec.cell_size)) + 1;
      r_lo = std::max(r_lo, 0);
      c_lo = std::max(c_lo, 0);
      r_hi = std::min(r_hi, rows - 1);
      c_hi = std::min(c_hi, cols - 1);
      for (int r = r_lo; r <= r_hi; ++r) {
        for (int c = c_lo; c <= c_hi; ++c) {
          const auto [cx, cy] = cell_to_world(spec, r, c);
          const double dx = cx - p.x;
          const double dy = cy - p.y;
          if (std::abs(dx) > radius || std::abs(dy) > radius) continue;
          const double v = norm * std::exp(-(dx * dx + dy * dy) / (2.0 * s));
          out.at(r, c, ch) = std::max(out.at(r, c, ch), v);
        }
      }
    }
  }
  return out;
}

struct GtHeatmapConfig {
  // sigma in cell units: max(min(width, length) / (divisor * cell), floor).
  double footprint_divisor = 6.0;
  double min_sigma_cells = 1.0;
};

// Classification target: one channel per class, a peak of exactly 1.0 at
// each box's center cell falling off as exp(-(dr^2 + dc^2) / (2 sigma^2))
// with dr, dc measured in cell indices. sigma adapts to the box footprint.
// Boxes whose center is outside the grid are skipped; overlaps combine by
// max. Every cell is evaluated (no truncation), values stay in [0, 1].
inline BevGrid gt_heatmap(const std::vector<Box3D>& boxes,
                          const GridSpec& spatial, const ClassMap& classes,
                          const GtHeatmapConfig& cfg = {}) {
  GridSpec spec = spatial;
  spec.channels = classes.size();
  spec.validate();
  if (!(cfg.footprint_divisor > 0.0) || !(cfg.min_sigma_cells > 0.0)) {
    throw ValidationError("gt heatmap parameters must be positive");
  }
  BevGrid out(spec);
  for (const auto& box : boxes) {
    const int ch = classes.index_of(box.class_name);
    const auto cell = world_to_cell(spec, box.center.x(), box.center.y());
    if (!cell) continue;
    const double footprint = std::min(box.size.x(), box.size.y());
    const double sigma = std::max(
        footprint / (cfg.footprint_divisor * spec.cell_size),
        cfg.min_sigma_cells);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int r = 0; r < out.rows(); ++r) {
      for (int c = 0; c < out.cols(); ++c) {
        const double dr = r - cell->row;
        const double dc = c - cell->col;
        const double v = std::exp(-(dr * dr + dc * dc) * inv);
        out.at(r, c, ch) = std::max(out.at(r, c, ch), v);
      }
    }
  }
  return out;
}

}  // namespace bevfuse
