#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "bevfuse/box.hpp"
#include "bevfuse/errors.hpp"
#include "bevfuse/grid.hpp"

namespace bevfuse {

// Two forms of the classification focal loss. AsPrinted keeps the exponent
// placement of the reference formulation this library reproduces (the
// focusing power alpha sits on the opposing-probability factors and gamma
// only shapes the soft-label weight 1 - g^gamma). Conventional is the
// penalty-reduced form most detection codebases use.
enum class FocalVariant { kAsPrinted, kConventional };

struct FocalConfig {
  double alpha = 2.0;
  double gamma = 4.0;
  double clamp_eps = 1e-4;
  // Cells whose target is at least this value count as positives for the
  // 1/N normalizer.
  double positive_threshold = 0.99;
  FocalVariant variant = FocalVariant::kAsPrinted;
};

struct FocalResult {
  double value = 0.0;
  BevGrid grad;  // d value / d prediction, per cell and channel

  explicit FocalResult(const GridSpec& spec) : grad(spec) {}
};

// Penalized cross-entropy over a predicted score grid against a soft target
// grid in [0, 1]. Predictions are clamped to [eps, 1 - eps] before any log;
// cells pinned by the clamp get zero gradient (the clamp is flat there).
// Normalized by the number of positive cells, never less than one.
inline FocalResult focal_loss(const BevGrid& pred, const BevGrid& gt,
                              const FocalConfig& cfg = {}) {
  if (!pred.spec().same_raster(gt.spec()) ||
      pred.channels() != gt.channels()) {
    throw MismatchedGrids("prediction and target grids must align");
  }
  const double a = cfg.alpha;
  const double g_pow = cfg.gamma;
  int n_pos = 0;
  for (double g : gt.data()) {
    if (g < 0.0 || g > 1.0 || !std::isfinite(g)) {
      throw ValidationError("targets must lie in [0, 1]");
    }
    if (g >= cfg.positive_threshold) ++n_pos;
  }
  const double n = std::max(n_pos, 1);
  FocalResult res(pred.spec());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const double raw = pred.data()[i];
    if (!std::isfinite(raw)) throw ValidationError("non-finite prediction");
    const double p =
        std::clamp(raw, cfg.clamp_eps, 1.0 - cfg.clamp_eps);
    const bool clamped = raw != p;
    const double g = gt.data()[i];
    double term = 0.0;
    double dterm = 0.0;
    if (cfg.variant == FocalVariant::kAsPrinted) {
      const double wn = 1.0 - std::pow(g, g_pow);
      term = std::log(p) * std::pow(1.0 - p, a) * g +
             std::log(1.0 - p) * std::pow(p, a) * wn;
      dterm = g * (std::pow(1.0 - p, a) / p -
                   a * std::pow(1.0 - p, a - 1.0) * std::log(p)) +
              wn * (a * std::pow(p, a - 1.0) * std::log(1.0 - p) -
                    std::pow(p, a) / (1.0 - p));
    } else {
      if (g >= cfg.positive_threshold) {
        term = std::pow(1.0 - p, a) * std::log(p);
        dterm = std::pow(1.0 - p, a) / p -
                a * std::pow(1.0 - p, a - 1.0) * std::log(p);
      } else {
        const double w = std::pow(1.0 - g, g_pow);
        term = w * std::pow(p, a) * std::log(1.0 - p);
        dterm = w * (a * std::pow(p, a - 1.0) * std::log(1.0 - p) -
                     std::pow(p, a) / (1.0 - p));
      }
    }
    total += term;
    res.grad.data()[i] = clamped ? 0.0 : -dterm / n;
  }
  res.value = -total / n;
  return res;
}

// Regression state for one object slot. The same struct carries predictions
// and targets; the loss reads pred fields from one and target fields from
// the other. Angles use a bin + residual split: yaw_bin and yaw are
// target-side, bin_logits / bin_residuals are prediction-side.
struct ObjectTarget {
  std::vector<double> offset;         // 3: x, y in cells; z in meters
  std::vector<double> dims;           // 3: log-sizes
  std::vector<double> velocity;       // 2: planar, m/s
  std::vector<double> bin_logits;     // per yaw bin
  std::vector<double> bin_residuals;  // per yaw bin, radians
  std::vector<double> attributes;     // probabilities (pred) or {0,1} (gt)
  double yaw = 0.0;
  int yaw_bin = 0;

  static ObjectTarget zeros(int n_bins, int n_attributes) {
    ObjectTarget t;
    t.offset.assign(3, 0.0);
    t.dims.assign(3, 0.0);
    t.velocity.assign(2, 0.0);
    t.bin_logits.assign(n_bins, 0.0);
    t.bin_residuals.assign(n_bins, 0.0);
    t.attributes.assign(n_attributes, 0.0);
    return t;
  }
};

struct RegLossConfig {
  double lambda_offset = 1.0;
  double lambda_dims = 1.0;
  double lambda_velocity = 1.0;
  double lambda_rotation = 1.0;
  double lambda_attributes = 1.0;
  // Per-attribute weights; empty means uniform 1 / n_attributes.
  std::vector<double> attribute_weights;
  std::vector<double> yaw_bin_centers = {0.0, std::numbers::pi};
  double attribute_clamp_eps = 1e-6;
};

struct RegLossResult {
  double offset = 0.0;
  double dims = 0.0;
  double velocity = 0.0;
  double rotation = 0.0;
  double attributes = 0.0;
  double total = 0.0;
  // One gradient record per prediction, same field shapes as the inputs.
  std::vector<ObjectTarget> grads;
};

namespace detail {

// Mean absolute error over all samples and components, with the summed
// subgradient written into grads (0 exactly at kinks).
inline double l1_component(
    const std::vector<ObjectTarget>& preds,
    const std::vector<ObjectTarget>& gts,
    std::vector<double> ObjectTarget::*field, double scale,
    std::vector<ObjectTarget>& grads) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& pv = preds[s].*field;
    const auto& gv = gts[s].*field;
    if (pv.size() != gv.size()) {
      throw ShapeMismatch("prediction and target component sizes differ");
    }
    count += pv.size();
  }
  if (count == 0) return 0.0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& pv = preds[s].*field;
    const auto& gv = gts[s].*field;
    auto& gr = grads[s].*field;
    gr.assign(pv.size(), 0.0);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double r = pv[i] - gv[i];
      total += std::abs(r);
      if (r > 0.0) gr[i] = scale / static_cast<double>(count);
      else if (r < 0.0) gr[i] = -scale / static_cast<double>(count);
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace detail

// All regression loss components and their analytic gradients with respect
// to the prediction fields. Gradients are of the *total* (lambda-weighted)
// sum, so a finite-difference probe of `total` matches them directly.
inline RegLossResult reg_losses(const std::vector<ObjectTarget>& preds,
                                const std::vector<ObjectTarget>& gts,
                                const RegLossConfig& cfg = {}) {
  if (preds.empty()) throw EmptyBatch("regression loss over zero samples");
  if (preds.size() != gts.size()) {
    throw ShapeMismatch("prediction and target counts differ");
  }
  const int n_bins = static_cast<int>(cfg.yaw_bin_centers.size());
  if (n_bins < 1) throw ValidationError("need at least one yaw bin");
  RegLossResult res;
  res.grads.resize(preds.size());
  for (std::size_t s = 0; s < preds.size(); ++s) {
    res.grads[s] = ObjectTarget::zeros(
        static_cast<int>(preds[s].bin_logits.size()),
        static_cast<int>(preds[s].attributes.size()));
  }

  res.offset = detail::l1_component(preds, gts, &ObjectTarget::offset,
                                    cfg.lambda_offset, res.grads);
  res.dims = detail::l1_component(preds, gts, &ObjectTarget::dims,
                                  cfg.lambda_dims, res.grads);
  res.velocity = detail::l1_component(preds, gts, &ObjectTarget::velocity,
                                      cfg.lambda_velocity, res.grads);

  // Rotation: cross-entropy over the bin classifier plus the negated mean
  // cosine alignment of every bin's residual.
  const double n_samples = static_cast<double>(preds.size());
  double rot_total = 0.0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& logits = preds[s].bin_logits;
    const auto& residuals = preds[s].bin_residuals;
    if (static_cast<int>(logits.size()) != n_bins ||
        static_cast<int>(residuals.size()) != n_bins) {
      throw ShapeMismatch("yaw bin counts disagree with configuration");
    }
    const int gt_bin = gts[s].yaw_bin;
    if (gt_bin < 0 || gt_bin >= n_bins) {
      throw ValidationError("target yaw bin out of range");
    }
    double m = logits[0];
    for (double l : logits) m = std::max(m, l);
    double z = 0.0;
    for (double l : logits) z += std::exp(l - m);
    const double log_z = std::log(z) + m;
    rot_total += log_z - logits[gt_bin];
    auto& glog = res.grads[s].bin_logits;
    for (int b = 0; b < n_bins; ++b) {
      const double soft = std::exp(logits[b] - log_z);
      glog[b] = cfg.lambda_rotation * (soft - (b == gt_bin ? 1.0 : 0.0)) /
                n_samples;
    }
    auto& gres = res.grads[s].bin_residuals;
    for (int b = 0; b < n_bins; ++b) {
      const double u = gts[s].yaw - cfg.yaw_bin_centers[b] - residuals[b];
      rot_total -= std::cos(u) / n_bins;
      gres[b] = cfg.lambda_rotation * (-std::sin(u) / n_bins) / n_samples;
    }
  }
  res.rotation = rot_total / n_samples;

  // Attributes: weighted binary cross-entropy, weights defaulting to
  // uniform 1 / n_attributes (absorbing the mean over attribute slots).
  double att_total = 0.0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& pa = preds[s].attributes;
    const auto& ga = gts[s].attributes;
    if (pa.size() != ga.size()) {
      throw ShapeMismatch("attribute vector sizes differ");
    }
    std::vector<double> w = cfg.attribute_weights;
    if (w.empty() && !pa.empty()) {
      w.assign(pa.size(), 1.0 / static_cast<double>(pa.size()));
    }
    if (w.size() != pa.size()) {
      throw ShapeMismatch("attribute weight count disagrees with attributes");
    }
    auto& gatt = res.grads[s].attributes;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const double a = ga[i];
      if (a != 0.0 && a != 1.0) {
        throw ValidationError("attribute targets must be 0 or 1");
      }
      const double p = std::clamp(pa[i], cfg.attribute_clamp_eps,
                                  1.0 - cfg.attribute_clamp_eps);
      att_total -= w[i] * (a * std::log(p) + (1.0 - a) * std::log(1.0 - p));
      const bool clamped = p != pa[i];
      gatt[i] = clamped ? 0.0
                        : cfg.lambda_attributes * w[i] *
                              (p - a) / (p * (1.0 - p)) / n_samples;
    }
  }
  res.attributes = att_total / n_samples;

  res.total = cfg.lambda_offset * res.offset + cfg.lambda_dims * res.dims +
              cfg.lambda_velocity * res.velocity +
              cfg.lambda_rotation * res.rotation +
              cfg.lambda_attributes * res.attributes;
  return res;
}

// Final objective: regression bundle scaled by beta plus the classification
// term.
inline double total_loss(double cls_loss, double reg_loss,
                         double beta = 0.25) {
  return beta * reg_loss + cls_loss;
}

// Dense regression targets/predictions alongside a class heatmap. All grids
// share the heatmap raster. rotation holds 4 channels per yaw bin:
// [logit, sin, cos, reserved].
struct RegressionMaps {
  BevGrid offset;    // 3 channels
  BevGrid dims;      // 3 channels, log-sizes
  BevGrid velocity;  // 2 channels
  BevGrid rotation;  // 4 * n_bins channels

  static RegressionMaps zeros(const GridSpec& spatial, int n_bins = 2) {
    auto with_channels = [&](int ch) {
      GridSpec s = spatial;
      s.channels = ch;
      return BevGrid(s);
    };
    return RegressionMaps{with_channels(3), with_channels(3),
                          with_channels(2), with_channels(4 * n_bins)};
  }
};

struct DecodeConfig {
  double score_threshold = 0.1;
  int max_detections = 500;
  std::vector<double> yaw_bin_centers = {0.0, std::numbers::pi};
};

// Extracts boxes at strict 3x3 local maxima of the class heatmap. A cell
// qualifies if its score exceeds every spatial neighbor in its own channel
// (missing neighbors at the border count as lower) and the threshold.
// Results are sorted by descending score, capped at max_detections; ties
// break on (row, col, channel) so output order is deterministic.
inline std::vector<Box3D> decode_detections(const BevGrid& heat,
                                            const RegressionMaps& maps,
                                            const ClassMap& classes,
                                            const DecodeConfig& cfg = {}) {
  if (heat.channels() != classes.size()) {
    throw ChannelMismatch("heatmap channels must match the class map");
  }
  const int n_bins = static_cast<int>(cfg.yaw_bin_centers.size());
  if (!heat.spec().same_raster(maps.offset.spec()) ||
      !heat.spec().same_raster(maps.dims.spec()) ||
      !heat.spec().same_raster(maps.velocity.spec()) ||
      !heat.spec().same_raster(maps.rotation.spec())) {
    throw MismatchedGrids("regression maps must share the heatmap raster");
  }
  if (maps.offset.channels() != 3 || maps.dims.channels() != 3 ||
      maps.velocity.channels() != 2 ||
      maps.rotation.channels() != 4 * n_bins) {
    throw ChannelMismatch("regression map channel layout is wrong");
  }
  struct Peak {
    double score;
    int row, col, ch;
  };
  std::vector<Peak> peaks;
  const GridSpec& spec = heat.spec();
  for (int r = 0; r < heat.rows(); ++r) {
    for (int c = 0; c < heat.cols(); ++c) {
      for (int ch = 0; ch < heat.channels(); ++ch) {
        const double v = heat.at(r, c, ch);
        if (!(v > cfg.score_threshold)) continue;
        bool is_peak = true;
        for (int dr = -1; dr <= 1 && is_peak; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int rr = r + dr;
            const int cc = c + dc;
            if (rr < 0 || rr >= heat.rows() || cc < 0 || cc >= heat.cols()) {
              continue;
            }
            if (heat.at(rr, cc, ch) >= v) {
              is_peak = false;
              break;
            }
          }
        }
        if (is_peak) peaks.push_back({v, r, c, ch});
      }
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.row != b.row) return a.row < b.row;
    if (a.col != b.col) return a.col < b.col;
    return a.ch < b.ch;
  });
  if (static_cast<int>(peaks.size()) > cfg.max_detections) {
    peaks.resize(cfg.max_detections);
  }
  std::vector<Box3D> out;
  out.reserve(peaks.size());
  for (const auto& pk : peaks) {
    const auto [cx, cy] = cell_to_world(spec, pk.row, pk.col);
    Box3D box;
    box.center.x() =
        cx + maps.offset.at(pk.row, pk.col, 0) * spec.cell_size;
    box.center.y() =
        cy + maps.offset.at(pk.row, pk.col, 1) * spec.cell_size;
    box.center.z() = maps.offset.at(pk.row, pk.col, 2);
    box.size.x() = std::exp(maps.dims.at(pk.row, pk.col, 0));
    box.size.y() = std::exp(maps.dims.at(pk.row, pk.col, 1));
    box.size.z() = std::exp(maps.dims.at(pk.row, pk.col, 2));
    box.velocity.x() = maps.velocity.at(pk.row, pk.col, 0);
    box.velocity.y() = maps.velocity.at(pk.row, pk.col, 1);
    int best_bin = 0;
    for (int b = 1; b < n_bins; ++b) {
      if (maps.rotation.at(pk.row, pk.col, 4 * b) >
          maps.rotation.at(pk.row, pk.col, 4 * best_bin)) {
        best_bin = b;
      }
    }
    const double s = maps.rotation.at(pk.row, pk.col, 4 * best_bin + 1);
    const double c = maps.rotation.at(pk.row, pk.col, 4 * best_bin + 2);
    const double residual = (s == 0.0 && c == 0.0) ? 0.0 : std::atan2(s, c);
    box.yaw = wrap_angle(cfg.yaw_bin_centers[best_bin] + residual);
    box.score = pk.score;
    box.class_name = classes.name(pk.ch);
    out.push_back(box);
  }
  return out;
}

// Regression target for one annotated box on a given raster. Offsets are
// measured from the center of the cell the box center falls in, in cell
// units; z is absolute. The yaw bin is the nearest center by wrapped
// distance; every bin gets the wrapped residual to its own center.
inline ObjectTarget build_target(const Box3D& box, const GridSpec& spec,
                                 const std::vector<double>& bin_centers,
                                 int n_attributes = 0,
                                 int attribute_index = -1) {
  const auto cell = world_to_cell(spec, box.center.x(), box.center.y());
  if (!cell) throw ValidationError("box center outside the raster");
  ObjectTarget t =
      ObjectTarget::zeros(static_cast<int>(bin_centers.size()), n_attributes);
  const auto [cx, cy] = cell_to_world(spec, cell->row, cell->col);
  t.offset[0] = (box.center.x() - cx) / spec.cell_size;
  t.offset[1] = (box.center.y() - cy) / spec.cell_size;
  t.offset[2] = box.center.z();
  for (int i = 0; i < 3; ++i) {
    if (!(box.size[i] > 0.0)) throw ValidationError("box sizes must be > 0");
    t.dims[i] = std::log(box.size[i]);
  }
  t.velocity[0] = box.velocity.x();
  t.velocity[1] = box.velocity.y();
  t.yaw = box.yaw;
  int best = 0;
  for (std::size_t b = 1; b < bin_centers.size(); ++b) {
    if (yaw_difference(box.yaw, bin_centers[b]) <
        yaw_difference(box.yaw, bin_centers[best])) {
      best = static_cast<int>(b);
    }
  }
  t.yaw_bin = best;
  for (std::size_t b = 0; b < bin_centers.size(); ++b) {
    t.bin_residuals[b] = wrap_angle(box.yaw - bin_centers[b]);
  }
  if (attribute_index >= 0 && attribute_index < n_attributes) {
    t.attributes[attribute_index] = 1.0;
  }
  return t;
}

}  // namespace bevfuse
