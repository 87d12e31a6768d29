#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "bevfuse/errors.hpp"

namespace bevfuse {

// Oriented 3-D box in the reference frame. size is (width, length, height):
// width spans the box's local y at yaw 0, length its local x. yaw rotates
// about +z, measured from +x toward +y.
struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  double yaw = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  std::string class_name;
  std::string attribute;
  double score = 0.0;
};

// Wraps into (-pi, pi].
inline double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

// Smallest absolute difference between two headings, in [0, pi].
inline double yaw_difference(double a, double b) {
  return std::abs(wrap_angle(a - b));
}

// Stable name <-> channel index mapping shared by heatmap targets, decoding
// and evaluation. Order of construction defines the channel order.
class ClassMap {
 public:
  explicit ClassMap(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ValidationError("class list must not be empty");
    for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
      if (!index_.emplace(names_[i], i).second) {
        throw ValidationError("duplicate class name: " + names_[i]);
      }
    }
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int index) const { return names_.at(index); }

  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown class: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const {
    return index_.count(name) > 0;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

// Ten-class detection taxonomy used by the evaluator defaults.
inline const std::vector<std::string>& detection_classes() {
  static const std::vector<std::string> names = {
      "car",        "truck",   "bus",     "trailer", "construction_vehicle",
      "pedestrian", "motorcycle", "bicycle", "traffic_cone", "barrier"};
  return names;
}

}  // namespace bevfuse
