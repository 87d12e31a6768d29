#pragma once

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevfuse/box.hpp"
#include "bevfuse/errors.hpp"
#include "bevfuse/fusion.hpp"
#include "bevfuse/geometry.hpp"
#include "bevfuse/grid.hpp"
#include "bevfuse/metrics.hpp"
#include "bevfuse/radar.hpp"
#include "bevfuse/toml.hpp"

namespace bevfuse::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Files and canonical serialization

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string out((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return out;
}

// All output goes through a temp file in the destination directory followed
// by an atomic rename, so a failed run never leaves a partial file behind.
inline void atomic_write_file(const std::string& path,
                              const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir =
      target.has_parent_path() ? target.parent_path() : fs::path(".");
  const fs::path tmp =
      dir / (target.filename().string() + ".tmp." +
             std::to_string(static_cast<unsigned long>(::getpid())));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("rename failed for: " + path);
  }
}

// nlohmann's default object is key-sorted and its number formatter emits the
// shortest exact round-trip decimal, so this dump is byte-stable across
// platforms for identical values.
inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Schema helpers

namespace detail {

inline const json& require(const json& j, const std::string& key,
                           const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(where, "missing required field '" + key + "'");
  }
  return j.at(key);
}

inline double require_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where, "expected a number");
  return j.get<double>();
}

inline int require_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SchemaError(where, "expected an integer");
  return j.get<int>();
}

inline std::string require_string(const json& j, const std::string& where) {
  if (!j.is_string()) throw SchemaError(where, "expected a string");
  return j.get<std::string>();
}

inline std::vector<double> require_numbers(const json& j, std::size_t n,
                                           const std::string& where) {
  if (!j.is_array() || j.size() != n) {
    throw SchemaError(where,
                      "expected an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(require_number(j[i], where + "/" + std::to_string(i)));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Poses

inline json pose_to_json(const RigidTransform& t) {
  const Eigen::Quaterniond q = t.quaternion();
  return json{{"rotation", {q.w(), q.x(), q.y(), q.z()}},
              {"translation",
               {t.translation().x(), t.translation().y(),
                t.translation().z()}}};
}

inline RigidTransform pose_from_json(const json& j, const std::string& where) {
  const auto r =
      detail::require_numbers(detail::require(j, "rotation", where), 4,
                              where + "/rotation");
  const auto t =
      detail::require_numbers(detail::require(j, "translation", where), 3,
                              where + "/translation");
  const double norm =
      std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]);
  if (std::abs(norm - 1.0) > 1e-6) {
    throw SchemaError(where + "/rotation",
                      "quaternion is not unit-norm within 1e-6");
  }
  return RigidTransform::from_quaternion(r[0], r[1], r[2], r[3],
                                         Eigen::Vector3d(t[0], t[1], t[2]));
}

// ---------------------------------------------------------------------------
// Scene documents

struct RadarEntry {
  std::string name;
  RigidTransform calib;  // sensor -> ego
  std::vector<RadarPoint> points;
};

struct CameraEntry {
  std::string name;
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  RigidTransform calib;  // camera <- ego
  int width = 0;
  int height = 0;
};

struct FrameDoc {
  double timestamp = 0.0;
  RigidTransform ego_pose;  // ego -> global
  std::vector<RadarEntry> radars;
  std::vector<CameraEntry> cameras;
  std::vector<Box3D> annotations;  // reference frame, keyframe only
};

struct SceneDocument {
  int version = 1;
  std::vector<FrameDoc> frames;  // newest first; frame 0 is the keyframe
};

// Table II field order for point rows, fixed by the file format.
inline json point_to_row(const RadarPoint& p) {
  return json::array({p.x, p.y, p.vx, p.vy, p.rcs,
                      static_cast<double>(p.valid_state),
                      static_cast<double>(p.doppler_state),
                      static_cast<double>(p.false_alarm), p.x_rms, p.y_rms,
                      p.vx_rms, p.vy_rms});
}

inline RadarPoint point_from_row(const json& row, const std::string& where) {
  const auto v = detail::require_numbers(row, 12, where);
  RadarPoint p;
  p.x = v[0];
  p.y = v[1];
  p.vx = v[2];
  p.vy = v[3];
  p.rcs = v[4];
  p.valid_state = static_cast<int>(v[5]);
  p.doppler_state = static_cast<int>(v[6]);
  p.false_alarm = static_cast<int>(v[7]);
  p.x_rms = v[8];
  p.y_rms = v[9];
  p.vx_rms = v[10];
  p.vy_rms = v[11];
  return p;
}

inline json box_to_json(const Box3D& b, bool with_score) {
  json j{{"class", b.class_name},
         {"center", {b.center.x(), b.center.y(), b.center.z()}},
         {"size_wlh", {b.size.x(), b.size.y(), b.size.z()}},
         {"yaw", b.yaw},
         {"velocity", {b.velocity.x(), b.velocity.y()}},
         {"attribute", b.attribute}};
  if (with_score) j["score"] = b.score;
  return j;
}

inline Box3D box_from_json(const json& j, const std::string& where,
                           bool with_score) {
  Box3D b;
  b.class_name =
      detail::require_string(detail::require(j, "class", where), where);
  const auto c = detail::require_numbers(detail::require(j, "center", where),
                                         3, where + "/center");
  const auto s = detail::require_numbers(
      detail::require(j, "size_wlh", where), 3, where + "/size_wlh");
  b.center = {c[0], c[1], c[2]};
  b.size = {s[0], s[1], s[2]};
  for (int i = 0; i < 3; ++i) {
    if (!(b.size[i] > 0.0)) {
      throw SchemaError(where + "/size_wlh", "sizes must be positive");
    }
  }
  b.yaw = detail::require_number(detail::require(j, "yaw", where),
                                 where + "/yaw");
  const auto v = detail::require_numbers(
      detail::require(j, "velocity", where), 2, where + "/velocity");
  b.velocity = {v[0], v[1]};
  b.attribute =
      detail::require_string(detail::require(j, "attribute", where), where);
  if (with_score) {
    b.score = detail::require_number(detail::require(j, "score", where),
                                     where + "/score");
    if (!(b.score >= 0.0 && b.score <= 1.0)) {
      throw SchemaError(where + "/score", "score must lie in [0, 1]");
    }
  }
  return b;
}

inline json scene_to_json(const SceneDocument& doc) {
  json frames = json::array();
  for (const auto& f : doc.frames) {
    json radars = json::array();
    for (const auto& r : f.radars) {
      json rows = json::array();
      for (const auto& p : r.points) rows.push_back(point_to_row(p));
      radars.push_back({{"name", r.name},
                        {"calib", pose_to_json(r.calib)},
                        {"points", rows}});
    }
    json cameras = json::array();
    for (const auto& c : f.cameras) {
      json k = json::array();
      for (int i = 0; i < 3; ++i)
        for (int jx = 0; jx < 3; ++jx) k.push_back(c.intrinsics(i, jx));
      cameras.push_back({{"name", c.name},
                         {"intrinsics", k},
                         {"extrinsics", pose_to_json(c.calib)},
                         {"width", c.width},
                         {"height", c.height}});
    }
    json anns = json::array();
    for (const auto& b : f.annotations) anns.push_back(box_to_json(b, false));
    frames.push_back({{"timestamp", f.timestamp},
                      {"ego_pose", pose_to_json(f.ego_pose)},
                      {"radars", radars},
                      {"cameras", cameras},
                      {"annotations", anns}});
  }
  return json{{"version", doc.version}, {"frames", frames}};
}

inline SceneDocument scene_from_json(const json& j) {
  SceneDocument doc;
  doc.version = detail::require_int(detail::require(j, "version", ""), "/version");
  const json& frames = detail::require(j, "frames", "");
  if (!frames.is_array()) throw SchemaError("/frames", "expected an array");
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const std::string fw = "/frames/" + std::to_string(fi);
    const json& fj = frames[fi];
    FrameDoc f;
    f.timestamp = detail::require_number(
        detail::require(fj, "timestamp", fw), fw + "/timestamp");
    f.ego_pose = pose_from_json(detail::require(fj, "ego_pose", fw),
                                fw + "/ego_pose");
    const json& radars = detail::require(fj, "radars", fw);
    if (!radars.is_array()) {
      throw SchemaError(fw + "/radars", "expected an array");
    }
    for (std::size_t ri = 0; ri < radars.size(); ++ri) {
      const std::string rw = fw + "/radars/" + std::to_string(ri);
      const json& rj = radars[ri];
      RadarEntry r;
      r.name = detail::require_string(detail::require(rj, "name", rw), rw);
      r.calib = pose_from_json(detail::require(rj, "calib", rw),
                               rw + "/calib");
      const json& rows = detail::require(rj, "points", rw);
      if (!rows.is_array()) {
        throw SchemaError(rw + "/points", "expected an array");
      }
      for (std::size_t pi = 0; pi < rows.size(); ++pi) {
        r.points.push_back(point_from_row(
            rows[pi], rw + "/points/" + std::to_string(pi)));
      }
      f.radars.push_back(std::move(r));
    }
    const json& cameras = detail::require(fj, "cameras", fw);
    if (!cameras.is_array()) {
      throw SchemaError(fw + "/cameras", "expected an array");
    }
    for (std::size_t ci = 0; ci < cameras.size(); ++ci) {
      const std::string cw = fw + "/cameras/" + std::to_string(ci);
      const json& cj = cameras[ci];
      CameraEntry c;
      c.name = detail::require_string(detail::require(cj, "name", cw), cw);
      const auto k = detail::require_numbers(
          detail::require(cj, "intrinsics", cw), 9, cw + "/intrinsics");
      for (int i = 0; i < 3; ++i)
        for (int jx = 0; jx < 3; ++jx) c.intrinsics(i, jx) = k[i * 3 + jx];
      c.calib = pose_from_json(detail::require(cj, "extrinsics", cw),
                               cw + "/extrinsics");
      c.width = detail::require_int(detail::require(cj, "width", cw),
                                    cw + "/width");
      c.height = detail::require_int(detail::require(cj, "height", cw),
                                     cw + "/height");
      f.cameras.push_back(std::move(c));
    }
    const json& anns = detail::require(fj, "annotations", fw);
    if (!anns.is_array()) {
      throw SchemaError(fw + "/annotations", "expected an array");
    }
    for (std::size_t ai = 0; ai < anns.size(); ++ai) {
      f.annotations.push_back(box_from_json(
          anns[ai], fw + "/annotations/" + std::to_string(ai), false));
    }
    doc.frames.push_back(std::move(f));
  }
  return doc;
}

inline void write_scene(const SceneDocument& doc, const std::string& path) {
  atomic_write_file(path, canonical_dump(scene_to_json(doc)));
}

inline SceneDocument parse_scene(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("invalid JSON: ") + e.what());
  }
  return scene_from_json(j);
}

// ---------------------------------------------------------------------------
// Submissions (detection results keyed by sample)

inline json submission_to_json(
    const std::map<std::string, std::vector<Box3D>>& results) {
  json out;
  json r = json::object();
  for (const auto& [key, boxes] : results) {
    json arr = json::array();
    for (const auto& b : boxes) {
      json bj = box_to_json(b, true);
      bj["translation"] = bj["center"];
      bj.erase("center");
      arr.push_back(bj);
    }
    r[key] = arr;
  }
  out["results"] = r;
  return out;
}

inline std::map<std::string, std::vector<Box3D>> submission_from_json(
    const json& j) {
  const json& results = detail::require(j, "results", "");
  if (!results.is_object()) {
    throw SchemaError("/results", "expected an object keyed by sample id");
  }
  std::map<std::string, std::vector<Box3D>> out;
  for (const auto& [key, arr] : results.items()) {
    const std::string where = "/results/" + key;
    if (!arr.is_array()) throw SchemaError(where, "expected an array");
    std::vector<Box3D> boxes;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      json bj = arr[i];
      const std::string bw = where + "/" + std::to_string(i);
      if (bj.contains("translation")) {
        bj["center"] = bj["translation"];
      }
      Box3D b = box_from_json(bj, bw, true);
      bool known = false;
      for (const auto& cls : detection_classes()) {
        if (cls == b.class_name) known = true;
      }
      if (!known) {
        throw SchemaError(bw + "/class",
                          "class is not in the detection taxonomy: " +
                              b.class_name);
      }
      boxes.push_back(std::move(b));
    }
    out[key] = std::move(boxes);
  }
  return out;
}

inline void write_submission(
    const std::map<std::string, std::vector<Box3D>>& results,
    const std::string& path) {
  atomic_write_file(path, canonical_dump(submission_to_json(results)));
}

inline std::map<std::string, std::vector<Box3D>> parse_submission(
    const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("invalid JSON: ") + e.what());
  }
  return submission_from_json(j);
}

// ---------------------------------------------------------------------------
// Point sets (intermediate product of sweep accumulation)

inline json points_to_json(const std::vector<RadarPoint>& points) {
  json rows = json::array();
  for (const auto& p : points) {
    json row = point_to_row(p);
    row.push_back(static_cast<double>(p.sweep_index));
    rows.push_back(row);
  }
  return json{{"version", 1}, {"points", rows}};
}

inline std::vector<RadarPoint> points_from_json(const json& j) {
  const json& rows = detail::require(j, "points", "");
  if (!rows.is_array()) throw SchemaError("/points", "expected an array");
  std::vector<RadarPoint> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "/points/" + std::to_string(i);
    const auto v = detail::require_numbers(rows[i], 13, where);
    json head = json::array();
    for (int f = 0; f < 12; ++f) head.push_back(v[f]);
    RadarPoint p = point_from_row(head, where);
    p.sweep_index = static_cast<int>(v[12]);
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid dumps: one JSON header line, then row-major float64 little-endian.

namespace detail {

inline void to_little_endian(double value, char out[8]) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
}

inline double from_little_endian(const char in[8]) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i]))
            << (8 * i);
  }
  double value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace detail

inline void write_grid(const BevGrid& grid, const std::string& path) {
  const GridSpec& s = grid.spec();
  const json header{{"cell_size", s.cell_size}, {"channels", s.channels},
                    {"cols", s.cols()},         {"rows", s.rows()},
                    {"x_max", s.x_max},         {"x_min", s.x_min},
                    {"y_max", s.y_max},         {"y_min", s.y_min}};
  std::string bytes = header.dump() + "\n";
  bytes.reserve(bytes.size() + grid.data().size() * 8);
  char buf[8];
  for (double v : grid.data()) {
    detail::to_little_endian(v, buf);
    bytes.append(buf, 8);
  }
  atomic_write_file(path, bytes);
}

inline BevGrid read_grid(const std::string& path) {
  const std::string bytes = read_file(path);
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) {
    throw SchemaError("/", "grid dump has no header line");
  }
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("bad grid header: ") + e.what());
  }
  GridSpec spec;
  spec.cell_size = detail::require_number(
      detail::require(header, "cell_size", ""), "/cell_size");
  spec.channels =
      detail::require_int(detail::require(header, "channels", ""), "/channels");
  spec.x_min = detail::require_number(detail::require(header, "x_min", ""),
                                      "/x_min");
  spec.x_max = detail::require_number(detail::require(header, "x_max", ""),
                                      "/x_max");
  spec.y_min = detail::require_number(detail::require(header, "y_min", ""),
                                      "/y_min");
  spec.y_max = detail::require_number(detail::require(header, "y_max", ""),
                                      "/y_max");
  spec.validate();
  const int rows = detail::require_int(detail::require(header, "rows", ""),
                                       "/rows");
  const int cols = detail::require_int(detail::require(header, "cols", ""),
                                       "/cols");
  if (rows != spec.rows() || cols != spec.cols()) {
    throw SchemaError("/", "grid header shape disagrees with extent");
  }
  BevGrid grid(spec);
  const std::size_t expected = grid.data().size() * 8;
  if (bytes.size() - nl - 1 != expected) {
    throw SchemaError("/", "grid payload size disagrees with header");
  }
  const char* payload = bytes.data() + nl + 1;
  for (std::size_t i = 0; i < grid.data().size(); ++i) {
    grid.data()[i] = detail::from_little_endian(payload + i * 8);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Convolution kernel fixtures

inline json kernel_to_json(const ConvKernel& k) {
  return json{{"shape", {k.kh, k.kw, k.c_in, k.c_out}},
              {"weights", k.weights},
              {"bias", k.bias}};
}

inline ConvKernel kernel_from_json(const json& j, const std::string& where) {
  const json& shape = detail::require(j, "shape", where);
  if (!shape.is_array() || shape.size() != 4) {
    throw SchemaError(where + "/shape", "expected [kh, kw, c_in, c_out]");
  }
  ConvKernel k;
  k.kh = detail::require_int(shape[0], where + "/shape/0");
  k.kw = detail::require_int(shape[1], where + "/shape/1");
  k.c_in = detail::require_int(shape[2], where + "/shape/2");
  k.c_out = detail::require_int(shape[3], where + "/shape/3");
  const json& w = detail::require(j, "weights", where);
  if (!w.is_array()) throw SchemaError(where + "/weights", "expected array");
  for (std::size_t i = 0; i < w.size(); ++i) {
    k.weights.push_back(
        detail::require_number(w[i], where + "/weights/" + std::to_string(i)));
  }
  const json& b = detail::require(j, "bias", where);
  if (!b.is_array()) throw SchemaError(where + "/bias", "expected array");
  for (std::size_t i = 0; i < b.size(); ++i) {
    k.bias.push_back(
        detail::require_number(b[i], where + "/bias/" + std::to_string(i)));
  }
  try {
    k.validate();
  } catch (const ValidationError& e) {
    throw SchemaError(where, e.what());
  }
  return k;
}

// ---------------------------------------------------------------------------
// Evaluation reports

namespace detail {

inline std::string threshold_key(double d) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", d);
  return buf;
}

}  // namespace detail

inline json report_to_json(const EvalReport& r) {
  json per_class = json::object();
  for (const auto& [cls, pc] : r.per_class) {
    json ap = json::object();
    for (const auto& [d, v] : pc.ap) ap[detail::threshold_key(d)] = v;
    per_class[cls] = json{{"ap", ap},
                          {"num_gt", pc.num_gt},
                          {"tp",
                           {{"aae", pc.tp.aae},
                            {"aoe", pc.tp.aoe},
                            {"ase", pc.tp.ase},
                            {"ate", pc.tp.ate},
                            {"ave", pc.tp.ave}}}};
  }
  return json{{"mAP", r.map},
              {"NDS", r.nds_value},
              {"mTP",
               {{"aae", r.mtp.maae},
                {"aoe", r.mtp.maoe},
                {"ase", r.mtp.mase},
                {"ate", r.mtp.mate},
                {"ave", r.mtp.mave}}},
              {"per_class", per_class}};
}

// Pre-aggregated metrics rows: composite scoring without re-running
// detection, e.g. published benchmark numbers.
struct AggregateRow {
  double map = 0.0;
  MeanTp mtp;
};

inline std::vector<AggregateRow> aggregates_from_json(const json& j) {
  const json& rows = detail::require(j, "aggregates", "");
  if (!rows.is_array()) throw SchemaError("/aggregates", "expected an array");
  std::vector<AggregateRow> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "/aggregates/" + std::to_string(i);
    const json& row = rows[i];
    AggregateRow a;
    a.map = detail::require_number(detail::require(row, "mAP", where),
                                   where + "/mAP");
    a.mtp.mate = detail::require_number(detail::require(row, "mATE", where),
                                        where + "/mATE");
    a.mtp.mase = detail::require_number(detail::require(row, "mASE", where),
                                        where + "/mASE");
    a.mtp.maoe = detail::require_number(detail::require(row, "mAOE", where),
                                        where + "/mAOE");
    a.mtp.mave = detail::require_number(detail::require(row, "mAVE", where),
                                        where + "/mAVE");
    a.mtp.maae = detail::require_number(detail::require(row, "mAAE", where),
                                        where + "/mAAE");
    out.push_back(a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configs

inline json load_config(const std::string& path) {
  const std::string text = read_file(path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml") {
    return toml::parse(text);
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("/", std::string("invalid config: ") + e.what());
  }
}

}  // namespace bevfuse::io
