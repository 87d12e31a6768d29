#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bevfuse/errors.hpp"
#include "bevfuse/geometry.hpp"
#include "bevfuse/grid.hpp"

namespace bevfuse {

// Minimal dense tensors, last index fastest. Enough structure for the view
// transform without dragging in a tensor library.
struct Tensor3 {
  int d0 = 0, d1 = 0, d2 = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int a, int b, int c)
      : d0(a), d1(b), d2(c),
        v(static_cast<std::size_t>(a) * b * c, 0.0) {}

  double& at(int i, int j, int k) {
    return v[(static_cast<std::size_t>(i) * d1 + j) * d2 + k];
  }
  double at(int i, int j, int k) const {
    return v[(static_cast<std::size_t>(i) * d1 + j) * d2 + k];
  }
};

struct Tensor4 {
  int d0 = 0, d1 = 0, d2 = 0, d3 = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int a, int b, int c, int d)
      : d0(a), d1(b), d2(c), d3(d),
        v(static_cast<std::size_t>(a) * b * c * d, 0.0) {}

  double& at(int i, int j, int k, int l) {
    return v[((static_cast<std::size_t>(i) * d1 + j) * d2 + k) * d3 + l];
  }
  double at(int i, int j, int k, int l) const {
    return v[((static_cast<std::size_t>(i) * d1 + j) * d2 + k) * d3 + l];
  }
};

// Downsampled image features plus per-pixel depth logits. rows/cols index
// the feature lattice, not raw pixels; `stride` says how many image pixels
// one lattice step covers, and lattice point (h, w) sits at image coordinate
// u = (w + 0.5) * stride, v = (h + 0.5) * stride.
struct ImageFeatureMap {
  int rows = 0;
  int cols = 0;
  double stride = 16.0;
  Tensor3 features;      // (rows, cols, channels)
  Tensor3 depth_logits;  // (rows, cols, bins)

  int channels() const { return features.d2; }
  int bins() const { return depth_logits.d2; }

  void validate() const {
    if (rows <= 0 || cols <= 0) throw ShapeMismatch("empty feature lattice");
    if (features.d0 != rows || features.d1 != cols ||
        depth_logits.d0 != rows || depth_logits.d1 != cols) {
      throw ShapeMismatch("feature / logit planes disagree with lattice");
    }
    if (features.d2 <= 0 || depth_logits.d2 <= 0) {
      throw ShapeMismatch("channels and depth bins must be positive");
    }
    if (!(stride > 0.0)) throw ShapeMismatch("stride must be positive");
  }
};

// Normalizes logits into a distribution along the last axis, numerically
// stabilized by the per-pixel max. Each (i, j) slice of the result sums to
// one.
inline Tensor3 softmax_depth(const Tensor3& logits) {
  if (logits.d0 <= 0 || logits.d1 <= 0 || logits.d2 <= 0) {
    throw ShapeMismatch("softmax input must be non-empty");
  }
  Tensor3 out(logits.d0, logits.d1, logits.d2);
  for (int i = 0; i < logits.d0; ++i) {
    for (int j = 0; j < logits.d1; ++j) {
      double m = logits.at(i, j, 0);
      for (int k = 1; k < logits.d2; ++k) m = std::max(m, logits.at(i, j, k));
      double sum = 0.0;
      for (int k = 0; k < logits.d2; ++k) {
        const double e = std::exp(logits.at(i, j, k) - m);
        out.at(i, j, k) = e;
        sum += e;
      }
      for (int k = 0; k < logits.d2; ++k) out.at(i, j, k) /= sum;
    }
  }
  return out;
}

// Depth distribution (outer product along bins) times the pixel's feature
// vector: result (rows, cols, bins, channels). Summing the bin axis
// reproduces the input features because the distribution sums to one.
inline Tensor4 lift(const ImageFeatureMap& fm) {
  fm.validate();
  const Tensor3 dist = softmax_depth(fm.depth_logits);
  Tensor4 out(fm.rows, fm.cols, fm.bins(), fm.channels());
  for (int i = 0; i < fm.rows; ++i) {
    for (int j = 0; j < fm.cols; ++j) {
      for (int d = 0; d < fm.bins(); ++d) {
        const double w = dist.at(i, j, d);
        for (int c = 0; c < fm.channels(); ++c) {
          out.at(i, j, d, c) = w * fm.features.at(i, j, c);
        }
      }
    }
  }
  return out;
}

// Shape of the frustum lattice: feature rows/cols, the image stride they
// cover, and the depth bin centers.
struct FrustumSpec {
  int rows = 0;
  int cols = 0;
  double stride = 16.0;
  std::vector<double> depth_bins;

  static FrustumSpec uniform(int rows, int cols, double stride,
                             double depth_min, double depth_max,
                             double depth_step) {
    if (!(depth_step > 0.0) || !(depth_max > depth_min)) {
      throw ValidationError("depth bin range must be increasing");
    }
    FrustumSpec s;
    s.rows = rows;
    s.cols = cols;
    s.stride = stride;
    const int n =
        static_cast<int>(std::llround((depth_max - depth_min) / depth_step));
    for (int i = 0; i <= n; ++i) {
      s.depth_bins.push_back(depth_min + i * depth_step);
    }
    return s;
  }
};

// Frustum lattice geometry plus lifted features, ready to scatter.
struct Frustum {
  int rows = 0;
  int cols = 0;
  std::vector<double> depth_bins;  // strictly increasing, all positive
  Tensor4 features;                // (rows, cols, bins, channels)
  Tensor4 points;                  // (rows, cols, bins, 3), reference frame

  int bins() const { return static_cast<int>(depth_bins.size()); }
  int channels() const { return features.d3; }
};

// 3-D location of every frustum lattice point in the reference frame.
// Lattice point (h, w) at bin d unprojects image coordinate
// (u, v) = ((w + 0.5) * stride, (h + 0.5) * stride) to the bin's depth along
// the optical axis, then maps camera -> reference through ref_from_camera.
inline Tensor4 build_rays(const CameraModel& cam, int rows, int cols,
                          const std::vector<double>& depth_bins, double stride,
                          const RigidTransform& ref_from_camera) {
  cam.validate();
  if (rows <= 0 || cols <= 0) throw ShapeMismatch("empty ray lattice");
  if (!(stride > 0.0)) throw ShapeMismatch("stride must be positive");
  if (depth_bins.empty()) throw ShapeMismatch("no depth bins");
  for (std::size_t d = 0; d < depth_bins.size(); ++d) {
    if (!(depth_bins[d] > 0.0)) {
      throw NonPositiveDepth("depth bins must be positive");
    }
    if (d > 0 && !(depth_bins[d] > depth_bins[d - 1])) {
      throw ValidationError("depth bins must be strictly increasing");
    }
  }
  const Eigen::Matrix3d k_inv = cam.intrinsics.inverse();
  Tensor4 out(rows, cols, static_cast<int>(depth_bins.size()), 3);
  for (int h = 0; h < rows; ++h) {
    for (int w = 0; w < cols; ++w) {
      const double u = (w + 0.5) * stride;
      const double v = (h + 0.5) * stride;
      const Eigen::Vector3d dir = k_inv * Eigen::Vector3d(u, v, 1.0);
      for (int d = 0; d < static_cast<int>(depth_bins.size()); ++d) {
        const Eigen::Vector3d p_ref =
            ref_from_camera.apply(dir * depth_bins[d]);
        out.at(h, w, d, 0) = p_ref.x();
        out.at(h, w, d, 1) = p_ref.y();
        out.at(h, w, d, 2) = p_ref.z();
      }
    }
  }
  return out;
}

inline Frustum make_frustum(const ImageFeatureMap& fm, const CameraModel& cam,
                            const std::vector<double>& depth_bins,
                            const RigidTransform& ref_from_camera) {
  Frustum f;
  f.rows = fm.rows;
  f.cols = fm.cols;
  f.depth_bins = depth_bins;
  f.features = lift(fm);
  f.points = build_rays(cam, fm.rows, fm.cols, depth_bins, fm.stride,
                        ref_from_camera);
  if (f.features.d2 != f.bins()) {
    throw ShapeMismatch("depth bins disagree between logits and bin list");
  }
  return f;
}

// Sum-pools every frustum element into the BEV cell under its (x, y).
// Elements outside the extent vanish; everything else lands somewhere, so
// total feature mass is conserved for in-bounds frustums. Iteration order is
// fixed (row, col, bin) making the result reproducible bit-for-bit.
inline BevGrid splat_to_bev(const Frustum& f, const GridSpec& spatial) {
  if (f.features.d0 != f.points.d0 || f.features.d1 != f.points.d1 ||
      f.features.d2 != f.points.d2 || f.points.d3 != 3) {
    throw ShapeMismatch("frustum features and points disagree");
  }
  GridSpec spec = spatial;
  spec.channels = f.channels();
  spec.validate();
  BevGrid out(spec);
  for (int h = 0; h < f.features.d0; ++h) {
    for (int w = 0; w < f.features.d1; ++w) {
      for (int d = 0; d < f.features.d2; ++d) {
        const double x = f.points.at(h, w, d, 0);
        const double y = f.points.at(h, w, d, 1);
        const auto cell = world_to_cell(spec, x, y);
        if (!cell) continue;
        for (int c = 0; c < f.channels(); ++c) {
          out.at(cell->row, cell->col, c) += f.features.at(h, w, d, c);
        }
      }
    }
  }
  return out;
}

}  // namespace bevfuse
