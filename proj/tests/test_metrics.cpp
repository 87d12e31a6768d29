#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "bevfuse/metrics.hpp"
#include "bevfuse/rng.hpp"
#include "oracles.hpp"

using namespace bevfuse;

namespace {

Box3D at(double x, double y, const std::string& cls, double score = 0.5) {
  Box3D b;
  b.center = {x, y, 0.0};
  b.class_name = cls;
  b.score = score;
  return b;
}

std::vector<Box3D> random_boxes(SplitMix64& rng, int n,
                                const std::vector<std::string>& classes,
                                bool scored) {
  std::vector<Box3D> out;
  for (int i = 0; i < n; ++i) {
    Box3D b = at(rng.uniform(0, 6), rng.uniform(0, 6),
                 classes[rng.uniform_int(static_cast<int>(classes.size()))]);
    // Distinct descending scores keep every ranking unambiguous.
    b.score = scored ? 0.9 - 0.05 * i : 0.0;
    out.push_back(b);
  }
  return out;
}

}  // namespace

TEST_CASE("matching requires strictly closer than the threshold") {
  const std::vector<Box3D> gts{at(0, 0, "car")};
  REQUIRE(match_detections({at(2.0, 0, "car")}, gts, "car", 2.0)
              .matches.empty());
  const double just_inside = std::nextafter(2.0, 0.0);
  REQUIRE(match_detections({at(just_inside, 0, "car")}, gts, "car", 2.0)
              .matches.size() == 1);
}

TEST_CASE("each prediction takes the nearest free ground truth") {
  const std::vector<Box3D> gts{at(0, 3, "car"), at(0, 0.5, "car")};
  const MatchResult m =
      match_detections({at(0, 0, "car", 0.9)}, gts, "car", 4.0);
  REQUIRE(m.matches.size() == 1);
  REQUIRE(m.matches[0] == std::pair<int, int>{0, 1});
  REQUIRE(m.unmatched_gts == std::vector<int>{0});
}

TEST_CASE("higher scores match first, ties break on index") {
  const std::vector<Box3D> gts{at(0, 0, "car")};
  // The far confident prediction grabs the only ground truth before the
  // near hesitant one gets a turn.
  const MatchResult m = match_detections(
      {at(1.0, 0, "car", 0.9), at(0.1, 0, "car", 0.5)}, gts, "car", 2.0);
  REQUIRE(m.matches.size() == 1);
  REQUIRE(m.matches[0].first == 0);
  REQUIRE(m.unmatched_preds == std::vector<int>{1});

  const MatchResult tie = match_detections(
      {at(1.5, 0, "car", 0.7), at(0.1, 0, "car", 0.7)}, gts, "car", 2.0);
  REQUIRE(tie.matches[0].first == 0);
}

TEST_CASE("matching ignores other classes entirely") {
  const std::vector<Box3D> gts{at(0, 0, "truck"), at(0, 0, "car")};
  const MatchResult m =
      match_detections({at(0, 0, "car"), at(0, 0, "bus")}, gts, "car", 2.0);
  REQUIRE(m.matches.size() == 1);
  REQUIRE(m.matches[0] == std::pair<int, int>{0, 1});
  REQUIRE(m.unmatched_preds.empty());
  REQUIRE(m.unmatched_gts.empty());
}

TEST_CASE("average precision closed forms") {
  const std::vector<Box3D> gts{at(0, 0, "car"), at(5, 5, "car")};

  // Perfect two-for-two sweep.
  REQUIRE(average_precision({at(0, 0, "car", 0.9), at(5, 5, "car", 0.8)},
                            gts, "car", 1.0) == 1.0);

  // A confident miss in front of one hit over one GT: precision 0.5 ramp.
  REQUIRE(average_precision(
              {at(50, 50, "car", 0.9), at(0, 0, "car", 0.8)},
              {at(0, 0, "car")}, "car", 1.0) == Catch::Approx(0.2).margin(1e-12));

  // A duplicate wedged between two hits drags the tail precision down.
  const double with_dup = average_precision(
      {at(0, 0, "car", 0.9), at(0.2, 0, "car", 0.8), at(5, 5, "car", 0.7)},
      gts, "car", 1.0);
  REQUIRE(with_dup == Catch::Approx(72.5 / 90.0 / 0.9).margin(1e-12));
  const double without = average_precision(
      {at(0, 0, "car", 0.9), at(5, 5, "car", 0.7)}, gts, "car", 1.0);
  REQUIRE(without == 1.0);
  REQUIRE(with_dup < without);

  // No ground truth of the class, or no predictions at all.
  REQUIRE(average_precision({at(0, 0, "truck", 0.9)}, gts, "truck", 1.0) ==
          0.0);
  REQUIRE(average_precision({}, gts, "car", 1.0) == 0.0);
}

TEST_CASE("average precision agrees with the prefix-sweep evaluation") {
  SplitMix64 rng(61);
  const std::vector<std::string> classes{"car", "truck"};
  for (int trial = 0; trial < 30; ++trial) {
    const auto preds = random_boxes(rng, 1 + trial % 5, classes, true);
    const auto gts = random_boxes(rng, 1 + (trial * 7) % 4, classes, false);
    for (const auto& cls : classes) {
      for (double d : {0.5, 1.0, 2.0, 4.0}) {
        const double got = average_precision(preds, gts, cls, d);
        const double want = oracles::ap(preds, gts, cls, d);
        REQUIRE_THAT(got, Catch::Matchers::WithinAbs(want, 1e-12));
      }
    }
  }
}

TEST_CASE("looser thresholds never lower the average precision") {
  SplitMix64 rng(62);
  for (int trial = 0; trial < 20; ++trial) {
    const auto preds = random_boxes(rng, 4, {"car"}, true);
    const auto gts = random_boxes(rng, 3, {"car"}, false);
    double prev = 0.0;
    for (double d : {0.5, 1.0, 2.0, 4.0}) {
      const double ap = average_precision(preds, gts, "car", d);
      REQUIRE(ap >= prev - 1e-15);
      prev = ap;
    }
  }
}

TEST_CASE("average precision only sees the ranking of scores") {
  SplitMix64 rng(63);
  auto preds = random_boxes(rng, 5, {"car"}, true);
  const auto gts = random_boxes(rng, 3, {"car"}, false);
  const double before = average_precision(preds, gts, "car", 2.0);
  for (auto& p : preds) p.score = 0.1 + 0.5 * p.score;
  REQUIRE(average_precision(preds, gts, "car", 2.0) == before);
}

TEST_CASE("true-positive error components in closed form") {
  Box3D pred = at(0.3, 0.4, "car");
  Box3D gt = at(0, 0, "car");
  pred.size = {1.0, 1.0, 1.0};
  gt.size = {2.0, 2.0, 2.0};
  pred.yaw = std::numbers::pi - 0.05;
  gt.yaw = -std::numbers::pi + 0.05;
  pred.velocity = {3.0, 4.0};
  pred.attribute = "moving";
  gt.attribute = "parked";

  const TpErrors e = tp_metrics({{pred, gt}});
  REQUIRE(e.ate == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(e.ase == Catch::Approx(0.875).margin(1e-15));
  REQUIRE(e.aoe == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(e.ave == Catch::Approx(5.0).margin(1e-15));
  REQUIRE(e.aae == 1.0);

  // Identical boxes cost nothing; an empty list saturates at 1.
  gt = pred;
  const TpErrors zero = tp_metrics({{pred, gt}});
  REQUIRE(zero.ate == 0.0);
  REQUIRE(zero.ase == 0.0);
  REQUIRE(zero.aoe == 0.0);
  REQUIRE(zero.ave == 0.0);
  REQUIRE(zero.aae == 0.0);
  const TpErrors sat = tp_metrics({});
  REQUIRE(sat.ate == 1.0);
  REQUIRE(sat.ase == 1.0);
  REQUIRE(sat.aoe == 1.0);
  REQUIRE(sat.ave == 1.0);
  REQUIRE(sat.aae == 1.0);

  REQUIRE(scale_error(pred, pred) == 0.0);
}

TEST_CASE("attribute errors average over the matched pairs") {
  Box3D a = at(0, 0, "car");
  a.attribute = "x";
  Box3D b = a;
  b.attribute = "y";
  const TpErrors e = tp_metrics({{a, a}, {a, b}});
  REQUIRE(e.aae == 0.5);
}

TEST_CASE("the composite score reproduces its reference rows") {
  REQUIRE(nds(0.377, {0.534, 0.271, 0.558, 0.493, 0.209}) ==
          Catch::Approx(0.482).margin(5e-4));
  REQUIRE(nds(0.308, {0.665, 0.273, 0.533, 0.829, 0.205}) ==
          Catch::Approx(0.4035).margin(1e-12));
  REQUIRE(nds(0.332, {0.649, 0.263, 0.535, 0.540, 0.142}) ==
          Catch::Approx(0.4531).margin(1e-12));
  // The second row sits exactly on a rounding tie; keep its full value
  // within the published tolerance of the 3-decimal target.
  REQUIRE(std::abs(nds(0.308, {0.665, 0.273, 0.533, 0.829, 0.205}) - 0.403) <=
          5e-4 + 1e-12);
}

TEST_CASE("the composite score rejects an out-of-range mAP") {
  REQUIRE_THROWS_AS(nds(-0.1, {}), ValidationError);
  REQUIRE_THROWS_AS(nds(1.1, {}), ValidationError);
  REQUIRE_THROWS_AS(nds(std::nan(""), {}), ValidationError);
}

TEST_CASE("errors beyond one stop contributing") {
  REQUIRE(nds(0.0, {2.0, 3.0, 1.5, 7.0, 1.0}) ==
          nds(0.0, {1.0, 1.0, 1.0, 1.0, 1.0}));
  REQUIRE(nds(1.0, {0.0, 0.0, 0.0, 0.0, 0.0}) == 1.0);
}

TEST_CASE("evaluation of an empty submission saturates every error") {
  const std::map<std::string, std::vector<Box3D>> preds{{"s0", {}}};
  const std::map<std::string, std::vector<Box3D>> gts{
      {"s0", {at(0, 0, "car"), at(3, 3, "truck")}}};
  EvalConfig cfg;
  cfg.classes = {"car", "truck"};
  const EvalReport r = evaluate(preds, gts, cfg);
  REQUIRE(r.map == 0.0);
  REQUIRE(r.mtp.mate == 1.0);
  REQUIRE(r.mtp.mase == 1.0);
  REQUIRE(r.mtp.maoe == 1.0);
  REQUIRE(r.mtp.mave == 1.0);
  REQUIRE(r.mtp.maae == 1.0);
  REQUIRE(r.nds_value == 0.0);
  REQUIRE(r.per_class.at("car").num_gt == 1);
  REQUIRE(r.per_class.at("car").num_matches_at_tp == 0);
}

TEST_CASE("evaluation demands identical scene keys") {
  const std::vector<Box3D> boxes{at(0, 0, "car")};
  REQUIRE_THROWS_AS(
      evaluate({{"a", boxes}}, {{"a", boxes}, {"b", boxes}}),
      SceneKeyMismatch);
  REQUIRE_THROWS_AS(evaluate({{"a", boxes}}, {{"b", boxes}}),
                    SceneKeyMismatch);
}

TEST_CASE("classes without ground truth stay out of the average") {
  EvalConfig cfg;
  cfg.classes = {"car", "truck"};
  const std::map<std::string, std::vector<Box3D>> gts{
      {"s0", {at(0, 0, "car")}}};
  const std::map<std::string, std::vector<Box3D>> preds{
      {"s0",
       {at(0, 0, "car", 0.9), at(1, 1, "truck", 0.95),
        at(4, 4, "truck", 0.85)}}};
  const EvalReport r = evaluate(preds, gts, cfg);
  // Truck has no GT: its (zero) APs must not dilute the car's perfect 1.0.
  REQUIRE(r.map == 1.0);
  REQUIRE(r.per_class.at("truck").num_gt == 0);
  for (const auto& [d, ap] : r.per_class.at("truck").ap) {
    REQUIRE(ap == 0.0);
  }
}

TEST_CASE("inapplicable metrics fall back instead of polluting the mean") {
  EvalConfig cfg;
  cfg.classes = {"traffic_cone"};
  Box3D gt = at(0, 0, "traffic_cone");
  Box3D pred = gt;
  pred.score = 0.9;
  pred.yaw = 0.3;
  pred.velocity = {2.0, 0.0};
  pred.attribute = "other";
  const EvalReport r =
      evaluate({{"s0", {pred}}}, {{"s0", {gt}}}, cfg);
  // Cones carry no orientation, velocity or attribute conventions, so the
  // means fall back to the saturated 1.0 while the per-class table still
  // records the raw numbers.
  REQUIRE(r.mtp.maoe == 1.0);
  REQUIRE(r.mtp.mave == 1.0);
  REQUIRE(r.mtp.maae == 1.0);
  REQUIRE(r.mtp.mate == 0.0);
  REQUIRE(r.per_class.at("traffic_cone").tp.aoe == Catch::Approx(0.3));
  REQUIRE(r.per_class.at("traffic_cone").tp.ave == Catch::Approx(2.0));
  REQUIRE(r.per_class.at("traffic_cone").tp.aae == 1.0);
}

TEST_CASE("barriers keep orientation but skip velocity and attributes") {
  EvalConfig cfg;
  cfg.classes = {"barrier"};
  Box3D gt = at(0, 0, "barrier");
  Box3D pred = gt;
  pred.score = 0.9;
  pred.yaw = 0.2;
  pred.velocity = {1.0, 0.0};
  const EvalReport r = evaluate({{"s0", {pred}}}, {{"s0", {gt}}}, cfg);
  REQUIRE(r.mtp.maoe == Catch::Approx(0.2));
  REQUIRE(r.mtp.mave == 1.0);
  REQUIRE(r.mtp.maae == 1.0);
}

TEST_CASE("single-scene evaluation matches the standalone curve") {
  SplitMix64 rng(64);
  const std::vector<std::string> classes{"car", "truck"};
  const auto preds = random_boxes(rng, 5, classes, true);
  const auto gts = random_boxes(rng, 4, classes, false);
  EvalConfig cfg;
  cfg.classes = classes;
  const EvalReport r = evaluate({{"s0", preds}}, {{"s0", gts}}, cfg);
  for (const auto& cls : classes) {
    int npos = 0;
    for (const auto& g : gts) npos += g.class_name == cls;
    for (double d : cfg.dist_thresholds) {
      if (npos == 0) continue;
      REQUIRE_THAT(r.per_class.at(cls).ap.at(d),
                   Catch::Matchers::WithinAbs(
                       average_precision(preds, gts, cls, d), 1e-12));
    }
  }
}

TEST_CASE("pooled scenes evaluate like one concatenated scene") {
  SplitMix64 rng(65);
  // Scene B lives 1000 m away so cross-scene matches are impossible in the
  // merged view; pooling must then reproduce the merged result exactly.
  auto preds_a = random_boxes(rng, 4, {"car"}, true);
  auto gts_a = random_boxes(rng, 3, {"car"}, false);
  auto preds_b = random_boxes(rng, 4, {"car"}, true);
  auto gts_b = random_boxes(rng, 2, {"car"}, false);
  for (auto& b : preds_b) {
    b.center.x() += 1000.0;
    b.score *= 0.11;  // keep all scores globally distinct
  }
  for (auto& b : gts_b) b.center.x() += 1000.0;

  EvalConfig cfg;
  cfg.classes = {"car"};
  const EvalReport split =
      evaluate({{"a", preds_a}, {"b", preds_b}},
               {{"a", gts_a}, {"b", gts_b}}, cfg);

  std::vector<Box3D> merged_preds = preds_a;
  merged_preds.insert(merged_preds.end(), preds_b.begin(), preds_b.end());
  std::vector<Box3D> merged_gts = gts_a;
  merged_gts.insert(merged_gts.end(), gts_b.begin(), gts_b.end());
  const EvalReport merged =
      evaluate({{"all", merged_preds}}, {{"all", merged_gts}}, cfg);

  REQUIRE_THAT(split.map, Catch::Matchers::WithinAbs(merged.map, 1e-12));
  REQUIRE_THAT(split.mtp.mate,
               Catch::Matchers::WithinAbs(merged.mtp.mate, 1e-12));
  REQUIRE_THAT(split.nds_value,
               Catch::Matchers::WithinAbs(merged.nds_value, 1e-12));
}

TEST_CASE("evaluation config validation") {
  EvalConfig cfg;
  cfg.dist_thresholds = {1.0, 0.5};
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg.dist_thresholds = {0.0, 1.0};
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg = EvalConfig{};
  cfg.tp_threshold = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  cfg = EvalConfig{};
  cfg.classes.clear();
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
}
