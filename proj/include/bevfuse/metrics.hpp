#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bevfuse/box.hpp"
#include "bevfuse/errors.hpp"

namespace bevfuse {

// Evaluation protocol. TP error metrics are computed only at tp_threshold;
// tp_applicability_skip lists, per metric, the classes whose mean excludes
// that metric (the conventional table: cones have no orientation, cones and
// barriers no velocity or attribute).
struct EvalConfig {
  std::vector<double> dist_thresholds = {0.5, 1.0, 2.0, 4.0};
  std::vector<std::string> classes = detection_classes();
  double tp_threshold = 2.0;
  std::map<std::string, std::set<std::string>> tp_applicability_skip = {
      {"aoe", {"traffic_cone"}},
      {"ave", {"traffic_cone", "barrier"}},
      {"aae", {"traffic_cone", "barrier"}},
  };

  void validate() const {
    if (classes.empty()) throw ValidationError("no classes configured");
    for (std::size_t i = 0; i < dist_thresholds.size(); ++i) {
      if (!(dist_thresholds[i] > 0.0)) {
        throw ValidationError("distance thresholds must be positive");
      }
      if (i > 0 && !(dist_thresholds[i] > dist_thresholds[i - 1])) {
        throw ValidationError("distance thresholds must be sorted ascending");
      }
    }
    if (!(tp_threshold > 0.0)) {
      throw ValidationError("tp_threshold must be positive");
    }
  }
};

inline double planar_distance(const Box3D& a, const Box3D& b) {
  const double dx = a.center.x() - b.center.x();
  const double dy = a.center.y() - b.center.y();
  return std::hypot(dx, dy);
}

struct MatchResult {
  // Indices into the input lists, one entry per matched prediction, in
  // descending score order.
  std::vector<std::pair<int, int>> matches;
  std::vector<int> unmatched_preds;  // ascending index order
  std::vector<int> unmatched_gts;   // ascending index order
};

namespace detail {

// Prediction order for matching: score descending, index ascending on ties.
inline std::vector<int> score_order(const std::vector<Box3D>& preds,
                                    const std::vector<int>& candidates) {
  std::vector<int> order = candidates;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (preds[a].score != preds[b].score) {
      return preds[a].score > preds[b].score;
    }
    return a < b;
  });
  return order;
}

}  // namespace detail

// Greedy one-to-one assignment: predictions of the class, visited in
// descending score order, each take the nearest still-unmatched GT of the
// class strictly closer than d on the ground plane.
inline MatchResult match_detections(const std::vector<Box3D>& preds,
                                    const std::vector<Box3D>& gts,
                                    const std::string& class_name, double d) {
  std::vector<int> pred_idx;
  for (int i = 0; i < static_cast<int>(preds.size()); ++i) {
    if (preds[i].class_name == class_name) pred_idx.push_back(i);
  }
  std::vector<int> gt_idx;
  for (int i = 0; i < static_cast<int>(gts.size()); ++i) {
    if (gts[i].class_name == class_name) gt_idx.push_back(i);
  }
  std::vector<bool> gt_taken(gts.size(), false);
  MatchResult res;
  for (int pi : detail::score_order(preds, pred_idx)) {
    int best_gt = -1;
    double best_dist = d;
    for (int gi : gt_idx) {
      if (gt_taken[gi]) continue;
      const double dist = planar_distance(preds[pi], gts[gi]);
      if (dist < best_dist) {
        best_dist = dist;
        best_gt = gi;
      }
    }
    if (best_gt >= 0) {
      gt_taken[best_gt] = true;
      res.matches.emplace_back(pi, best_gt);
    } else {
      res.unmatched_preds.push_back(pi);
    }
  }
  std::sort(res.unmatched_preds.begin(), res.unmatched_preds.end());
  for (int gi : gt_idx) {
    if (!gt_taken[gi]) res.unmatched_gts.push_back(gi);
  }
  return res;
}

namespace detail {

// Precision at each recall grid point from the raw sweep samples, then the
// clipped-and-renormalized mean. Samples must be in sweep order (cumulative
// counts); at equal recall the earliest sample has the highest precision, so
// collapsing to first occurrences realizes the max-precision envelope.
inline double ap_from_samples(const std::vector<std::pair<double, double>>&
                                  rec_prec_samples) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : rec_prec_samples) {
    if (pts.empty() || s.first > pts.back().first) pts.push_back(s);
  }
  if (pts.empty()) return 0.0;
  double acc = 0.0;
  for (int i = 11; i <= 100; ++i) {
    const double r = static_cast<double>(i) / 100.0;
    double p = 0.0;
    if (r <= pts.front().first) {
      p = pts.front().second;
    } else if (r > pts.back().first) {
      p = 0.0;
    } else {
      for (std::size_t j = 1; j < pts.size(); ++j) {
        if (r <= pts[j].first) {
          const auto& [r0, p0] = pts[j - 1];
          const auto& [r1, p1] = pts[j];
          p = p0 + (p1 - p0) * (r - r0) / (r1 - r0);
          break;
        }
      }
    }
    acc += std::max(p - 0.1, 0.0);
  }
  // The grid sum can creep a few ulps past the exact value; AP is a
  // probability-like quantity, so pin it to its range.
  return std::clamp(acc / 90.0 / 0.9, 0.0, 1.0);
}

}  // namespace detail

// Area under the precision-recall curve of greedy center-distance matching,
// sampled on the 101-point recall grid with sub-0.1 precision clipped and
// the recall band [0.11, 1] renormalized by 0.9. Returns 0 when the class
// has no GT (callers exclude such classes from averages).
inline double average_precision(const std::vector<Box3D>& preds,
                                const std::vector<Box3D>& gts,
                                const std::string& class_name, double d) {
  int npos = 0;
  for (const auto& g : gts) {
    if (g.class_name == class_name) ++npos;
  }
  if (npos == 0) return 0.0;
  const MatchResult m = match_detections(preds, gts, class_name, d);
  // Rebuild the sweep: every prediction of the class in score order is a TP
  // exactly when it appears in m.matches.
  std::set<int> tp_set;
  for (const auto& [pi, gi] : m.matches) tp_set.insert(pi);
  std::vector<int> pred_idx;
  for (int i = 0; i < static_cast<int>(preds.size()); ++i) {
    if (preds[i].class_name == class_name) pred_idx.push_back(i);
  }
  std::vector<std::pair<double, double>> samples;
  int tp = 0, fp = 0;
  for (int pi : detail::score_order(preds, pred_idx)) {
    if (tp_set.count(pi)) ++tp;
    else ++fp;
    samples.emplace_back(static_cast<double>(tp) / npos,
                         static_cast<double>(tp) / (tp + fp));
  }
  return detail::ap_from_samples(samples);
}

struct TpErrors {
  double ate = 1.0;
  double ase = 1.0;
  double aoe = 1.0;
  double ave = 1.0;
  double aae = 1.0;
};

// Scale error: 1 - IoU of the two boxes after aligning center and heading,
// which reduces to elementwise-min volume over union.
inline double scale_error(const Box3D& pred, const Box3D& gt) {
  const double vmin = std::min(pred.size.x(), gt.size.x()) *
                      std::min(pred.size.y(), gt.size.y()) *
                      std::min(pred.size.z(), gt.size.z());
  const double vp = pred.size.prod();
  const double vg = gt.size.prod();
  return 1.0 - vmin / (vp + vg - vmin);
}

// Plain means over matched (prediction, gt) pairs. An empty match list
// leaves every field at the saturated value 1.0.
inline TpErrors tp_metrics(
    const std::vector<std::pair<Box3D, Box3D>>& matches) {
  TpErrors e;
  if (matches.empty()) return e;
  double ate = 0.0, ase = 0.0, aoe = 0.0, ave = 0.0, aae = 0.0;
  for (const auto& [pred, gt] : matches) {
    ate += planar_distance(pred, gt);
    ase += scale_error(pred, gt);
    aoe += yaw_difference(pred.yaw, gt.yaw);
    ave += (pred.velocity - gt.velocity).norm();
    aae += pred.attribute == gt.attribute ? 0.0 : 1.0;
  }
  const double n = static_cast<double>(matches.size());
  e.ate = ate / n;
  e.ase = ase / n;
  e.aoe = aoe / n;
  e.ave = ave / n;
  e.aae = aae / n;
  return e;
}

struct MeanTp {
  double mate = 1.0;
  double mase = 1.0;
  double maoe = 1.0;
  double mave = 1.0;
  double maae = 1.0;
};

// Composite score: 10 * NDS = 5 * mAP + sum over the five mean TP errors of
// (1 - min(1, err)).
inline double nds(double map, const MeanTp& mtp) {
  if (!(map >= 0.0 && map <= 1.0)) {
    throw ValidationError("mAP must lie in [0, 1]");
  }
  const double sum = (1.0 - std::min(1.0, mtp.mate)) +
                     (1.0 - std::min(1.0, mtp.mase)) +
                     (1.0 - std::min(1.0, mtp.maoe)) +
                     (1.0 - std::min(1.0, mtp.mave)) +
                     (1.0 - std::min(1.0, mtp.maae));
  return (5.0 * map + sum) / 10.0;
}

struct PerClassResult {
  std::map<double, double> ap;  // distance threshold -> AP
  TpErrors tp;
  int num_gt = 0;
  int num_matches_at_tp = 0;
};

struct EvalReport {
  double map = 0.0;
  double nds_value = 0.0;
  MeanTp mtp;
  std::map<std::string, PerClassResult> per_class;
};

// Full multi-scene evaluation. Predictions and ground truth are keyed by
// scene; both maps must cover exactly the same keys. Matching is pooled:
// predictions from all scenes are ranked together, each matching only
// against its own scene's boxes, which is equivalent to per-scene matching
// but yields one global PR curve per (class, threshold).
inline EvalReport evaluate(
    const std::map<std::string, std::vector<Box3D>>& preds,
    const std::map<std::string, std::vector<Box3D>>& gts,
    const EvalConfig& cfg = {}) {
  cfg.validate();
  if (preds.size() != gts.size()) {
    throw SceneKeyMismatch("prediction and gt scene sets differ in size");
  }
  for (const auto& [key, _] : preds) {
    if (!gts.count(key)) {
      throw SceneKeyMismatch("scene missing from ground truth: " + key);
    }
  }

  std::vector<std::string> scene_keys;
  for (const auto& [key, _] : gts) scene_keys.push_back(key);

  struct PooledPred {
    double score;
    int scene;
    int index;
  };

  EvalReport report;
  double ap_acc = 0.0;
  int ap_count = 0;
  std::map<std::string, std::vector<double>> mtp_values;  // metric -> samples

  for (const auto& cls : cfg.classes) {
    PerClassResult pc;
    int npos = 0;
    for (const auto& key : scene_keys) {
      for (const auto& g : gts.at(key)) {
        if (g.class_name == cls) ++npos;
      }
    }
    pc.num_gt = npos;

    // Pool predictions of this class across scenes in global score order.
    std::vector<PooledPred> pool;
    for (int s = 0; s < static_cast<int>(scene_keys.size()); ++s) {
      const auto& plist = preds.at(scene_keys[s]);
      for (int i = 0; i < static_cast<int>(plist.size()); ++i) {
        if (plist[i].class_name == cls) {
          pool.push_back({plist[i].score, s, i});
        }
      }
    }
    std::sort(pool.begin(), pool.end(),
              [](const PooledPred& a, const PooledPred& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.scene != b.scene) return a.scene < b.scene;
                return a.index < b.index;
              });

    auto sweep = [&](double d, std::vector<std::pair<Box3D, Box3D>>* pairs) {
      std::map<int, std::vector<bool>> taken;
      std::vector<std::pair<double, double>> samples;
      int tp = 0, fp = 0;
      for (const auto& pp : pool) {
        const auto& plist = preds.at(scene_keys[pp.scene]);
        const auto& glist = gts.at(scene_keys[pp.scene]);
        auto& flags = taken[pp.scene];
        if (flags.empty()) flags.assign(glist.size(), false);
        int best_gt = -1;
        double best_dist = d;
        for (int gi = 0; gi < static_cast<int>(glist.size()); ++gi) {
          if (glist[gi].class_name != cls || flags[gi]) continue;
          const double dist = planar_distance(plist[pp.index], glist[gi]);
          if (dist < best_dist) {
            best_dist = dist;
            best_gt = gi;
          }
        }
        if (best_gt >= 0) {
          flags[best_gt] = true;
          ++tp;
          if (pairs) pairs->emplace_back(plist[pp.index], glist[best_gt]);
        } else {
          ++fp;
        }
        if (npos > 0) {
          samples.emplace_back(static_cast<double>(tp) / npos,
                               static_cast<double>(tp) / (tp + fp));
        }
      }
      return samples;
    };

    for (double d : cfg.dist_thresholds) {
      const double ap =
          npos == 0 ? 0.0 : detail::ap_from_samples(sweep(d, nullptr));
      pc.ap[d] = ap;
      if (npos > 0) {
        ap_acc += ap;
        ++ap_count;
      }
    }

    std::vector<std::pair<Box3D, Box3D>> tp_pairs;
    sweep(cfg.tp_threshold, &tp_pairs);
    pc.num_matches_at_tp = static_cast<int>(tp_pairs.size());
    pc.tp = tp_metrics(tp_pairs);

    if (npos > 0) {
      auto consider = [&](const std::string& metric, double value) {
        auto it = cfg.tp_applicability_skip.find(metric);
        if (it != cfg.tp_applicability_skip.end() && it->second.count(cls)) {
          return;
        }
        mtp_values[metric].push_back(value);
      };
      consider("ate", pc.tp.ate);
      consider("ase", pc.tp.ase);
      consider("aoe", pc.tp.aoe);
      consider("ave", pc.tp.ave);
      consider("aae", pc.tp.aae);
    }

    report.per_class[cls] = pc;
  }

  report.map = ap_count == 0 ? 0.0 : ap_acc / ap_count;
  auto mean_of = [&](const std::string& metric, double fallback) {
    const auto it = mtp_values.find(metric);
    if (it == mtp_values.end() || it->second.empty()) return fallback;
    double s = 0.0;
    for (double v : it->second) s += v;
    return s / static_cast<double>(it->second.size());
  };
  report.mtp.mate = mean_of("ate", 1.0);
  report.mtp.mase = mean_of("ase", 1.0);
  report.mtp.maoe = mean_of("aoe", 1.0);
  report.mtp.mave = mean_of("ave", 1.0);
  report.mtp.maae = mean_of("aae", 1.0);
  report.nds_value = nds(report.map, report.mtp);
  return report;
}

}  // namespace bevfuse
