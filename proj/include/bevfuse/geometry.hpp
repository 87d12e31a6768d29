#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bevfuse/errors.hpp"

namespace bevfuse {

// Proper rigid motion in 3-D. Rotation is stored as a matrix; quaternions
// appear only at the file-format boundary (io.hpp) and are converted on
// entry. Transforms are value types: all operations below return new
// instances.
class RigidTransform {
 public:
  RigidTransform()
      : rotation_(Eigen::Matrix3d::Identity()),
        translation_(Eigen::Vector3d::Zero()) {}

  // Validates orthonormality; callers composing long chains should go
  // through compose(), which re-orthonormalizes drift instead of throwing.
  RigidTransform(const Eigen::Matrix3d& rotation,
                 const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    const double drift =
        (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff();
    if (drift > 1e-9 || rotation_.determinant() < 0.0) {
      throw ValidationError("rotation matrix is not orthonormal");
    }
  }

  static RigidTransform identity() { return RigidTransform(); }

  // w, x, y, z convention. The quaternion is normalized here; rejecting
  // grossly non-unit input is the file parser's job.
  static RigidTransform from_quaternion(double w, double x, double y, double z,
                                        const Eigen::Vector3d& translation) {
    Eigen::Quaterniond q(w, x, y, z);
    if (q.norm() == 0.0) {
      throw ValidationError("zero quaternion");
    }
    q.normalize();
    RigidTransform t;
    t.rotation_ = q.toRotationMatrix();
    t.translation_ = translation;
    return t;
  }

  static RigidTransform from_yaw(double yaw,
                                 const Eigen::Vector3d& translation =
                                     Eigen::Vector3d::Zero()) {
    RigidTransform t;
    t.rotation_ =
        Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    t.translation_ = translation;
    return t;
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Quaterniond quaternion() const {
    Eigen::Quaterniond q(rotation_);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();  // canonical sign for output
    return q;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

  // Rotation only: for direction-like quantities (velocities).
  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const {
    return rotation_ * v;
  }

 private:
  friend RigidTransform compose(const RigidTransform&, const RigidTransform&);
  friend RigidTransform invert(const RigidTransform&);

  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

namespace detail {

// Nearest orthonormal matrix in the Frobenius sense (polar factor via SVD).
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  if ((u * svd.matrixV().transpose()).determinant() < 0.0) {
    u.col(2) = -u.col(2);
  }
  return u * svd.matrixV().transpose();
}

}  // namespace detail

// a then-applied-after b: (a ∘ b)(p) = a(b(p)). Accumulated rounding in the
// rotation block is snapped back to the orthonormal manifold whenever it
// exceeds 1e-12, so arbitrarily long chains stay valid.
inline RigidTransform compose(const RigidTransform& a,
                              const RigidTransform& b) {
  RigidTransform out;
  out.rotation_ = a.rotation() * b.rotation();
  out.translation_ = a.rotation() * b.translation() + a.translation();
  const double drift = (out.rotation_.transpose() * out.rotation_ -
                        Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  if (drift > 1e-12) {
    out.rotation_ = detail::orthonormalize(out.rotation_);
  }
  return out;
}

inline RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation_ = t.rotation().transpose();
  out.translation_ = -(t.rotation().transpose() * t.translation());
  return out;
}

inline std::vector<Eigen::Vector3d> transform_points(
    const RigidTransform& t, const std::vector<Eigen::Vector3d>& points) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(t.apply(p));
  return out;
}

// Maps a point observed by a sensor at an earlier sweep into the reference
// sensor frame at the current one, assuming a globally consistent odometry
// chain: sensor(t-k) -> ego(t-k) -> global -> ego(t) -> reference sensor(t).
//
//   calib_sensor_to_ego   mounting of the sensor on the ego body
//   ego_to_global_at_src  ego pose when the sweep was taken
//   ego_to_global_at_ref  ego pose at the reference timestamp
//   ref_from_ego          reference sensor frame from ego (usually the
//                         inverse of the same mounting calibration)
inline RigidTransform chain_sweep_transform(
    const RigidTransform& calib_sensor_to_ego,
    const RigidTransform& ego_to_global_at_src,
    const RigidTransform& ego_to_global_at_ref,
    const RigidTransform& ref_from_ego) {
  return compose(
      ref_from_ego,
      compose(invert(ego_to_global_at_ref),
              compose(ego_to_global_at_src, calib_sensor_to_ego)));
}

struct PixelDepth {
  double u = 0.0;  // column coordinate, pixels
  double v = 0.0;  // row coordinate, pixels
  double depth = 0.0;  // along the optical axis, meters
};

// Pinhole camera. `extrinsics` maps reference-frame points into the camera
// frame (camera-from-reference). Intrinsics follow the usual K layout with
// fx, fy on the diagonal and the principal point in the last column.
struct CameraModel {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  RigidTransform extrinsics;  // camera <- reference
  int width = 0;
  int height = 0;

  void validate() const {
    if (intrinsics(0, 0) <= 0.0 || intrinsics(1, 1) <= 0.0) {
      throw ValidationError("focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
      throw ValidationError("image dimensions must be positive");
    }
  }
};

inline PixelDepth project_to_image(const CameraModel& cam,
                                   const Eigen::Vector3d& point_ref) {
  const Eigen::Vector3d pc = cam.extrinsics.apply(point_ref);
  if (pc.z() <= 0.0) {
    throw BehindCamera("point is at or behind the image plane");
  }
  const Eigen::Vector3d uvw = cam.intrinsics * pc;
  return PixelDepth{uvw.x() / pc.z(), uvw.y() / pc.z(), pc.z()};
}

inline Eigen::Vector3d unproject_pixel(const CameraModel& cam, double u,
                                       double v, double depth) {
  if (depth <= 0.0) {
    throw NonPositiveDepth("unprojection requires depth > 0");
  }
  const Eigen::Vector3d pix(u, v, 1.0);
  const Eigen::Vector3d pc = cam.intrinsics.inverse() * pix * depth;
  return invert(cam.extrinsics).apply(pc);
}

}  // namespace bevfuse
