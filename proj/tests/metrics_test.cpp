#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gocard/errors.hpp"
#include "gocard/metrics.hpp"
#include "gocard/rng.hpp"

using namespace gocard;

namespace {

BoundingBox make_box(double x0, double y0, double x1, double y1, int cls) {
  BoundingBox b;
  b.x_min = x0;
  b.y_min = y0;
  b.x_max = x1;
  b.y_max = y1;
  b.class_id = cls;
  return b;
}

DetectionRecord make_det(int image, double x0, double y0, double x1, double y1, int cls,
                         double conf) {
  DetectionRecord r;
  r.image_id = image;
  r.det.box = make_box(x0, y0, x1, y1, cls);
  r.det.class_id = cls;
  r.det.confidence = conf;
  return r;
}

GroundTruthRecord make_gt(int image, double x0, double y0, double x1, double y1, int cls) {
  GroundTruthRecord r;
  r.image_id = image;
  r.box = make_box(x0, y0, x1, y1, cls);
  return r;
}

// Macro F1 recomputed from an explicitly built confusion matrix.
double f1_oracle(const std::vector<int>& preds, const std::vector<int>& tgts, int k) {
  std::vector<std::vector<long long>> cm(static_cast<std::size_t>(k),
                                         std::vector<long long>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++cm[static_cast<std::size_t>(tgts[i])][static_cast<std::size_t>(preds[i])];
  }
  double total = 0.0;
  int scored = 0;
  for (int c = 0; c < k; ++c) {
    long long tp = cm[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    long long row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
      col += cm[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
    }
    if (row == 0 && col == 0) continue;
    const long long fn = row - tp, fp = col - tp;
    const long long denom = 2 * tp + fp + fn;
    total += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    ++scored;
  }
  return scored == 0 ? 0.0 : total / scored;
}

// Direct max-scan interpolation, quadratic on purpose.
double ap_oracle(const std::vector<char>& ranked, long long gt) {
  std::vector<double> recall, precision;
  long long tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i]) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  double ap = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (recall[i] <= prev) continue;
    double pmax = 0.0;
    for (std::size_t j = 0; j < ranked.size(); ++j) {
      if (recall[j] >= recall[i]) pmax = std::max(pmax, precision[j]);
    }
    ap += (recall[i] - prev) * pmax;
    prev = recall[i];
  }
  return ap;
}

}  // namespace

TEST_CASE("f1 macro pinned examples") {
  CHECK(f1_macro({0, 1, 2, 0}, {0, 1, 2, 0}, 3) == doctest::Approx(1.0));
  CHECK(f1_macro({1, 1, 0}, {0, 0, 1}, 2) == doctest::Approx(0.0));

  // Class 0 gets TP=3, FP=1, FN=2 (F1 = 6/9); class 1 gets TP=0 (F1 = 0).
  std::vector<int> preds{0, 0, 0, 0, 1, 1};
  std::vector<int> tgts{0, 0, 0, 1, 0, 0};
  CHECK(f1_macro(preds, tgts, 2) == doctest::Approx((6.0 / 9.0) / 2.0).epsilon(1e-12));

  // Classes absent from both sides stay out of the mean.
  CHECK(f1_macro({0, 1}, {0, 1}, 5) == doctest::Approx(1.0));

  CHECK_THROWS_AS(f1_macro({0, 5}, {0, 1}, 3), DataError);
  CHECK_THROWS_AS(f1_macro({0}, {0, 1}, 3), DataError);
}

TEST_CASE("f1 macro equals the confusion-matrix oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = rng.uniform_int(2, 29);
    const int n = rng.uniform_int(1, 120);
    std::vector<int> preds, tgts;
    for (int i = 0; i < n; ++i) {
      preds.push_back(rng.uniform_int(0, k - 1));
      tgts.push_back(rng.uniform_int(0, k - 1));
    }
    CHECK(f1_macro(preds, tgts, k) == doctest::Approx(f1_oracle(preds, tgts, k)).epsilon(1e-12));
  }
}

TEST_CASE("detection matching pinned examples") {
  // IoU 0.6 over threshold 0.5.
  auto res = match_detections({make_det(0, 0, 0, 1, 1, 2, 0.9)},
                              {make_gt(0, 0.25, 0, 1.25, 1, 2)}, 0.5, 3);
  CHECK(res.counts.tp[2] == 1);
  CHECK(res.counts.fp[2] == 0);
  CHECK(res.counts.fn[2] == 0);

  // Duplicate on one GT: the higher-confidence one wins, the other is FP.
  auto dup = match_detections(
      {make_det(0, 0, 0, 1, 1, 0, 0.7), make_det(0, 0, 0, 1, 1, 0, 0.9)},
      {make_gt(0, 0, 0, 1, 1, 0)}, 0.5, 1);
  CHECK(dup.counts.tp[0] == 1);
  CHECK(dup.counts.fp[0] == 1);
  CHECK(dup.is_tp[1] == 1);
  CHECK(dup.is_tp[0] == 0);

  // Right box, wrong class: FP for the predicted class, FN for the GT class.
  auto wrong = match_detections({make_det(0, 0, 0, 1, 1, 1, 0.9)},
                                {make_gt(0, 0, 0, 1, 1, 0)}, 0.5, 2);
  CHECK(wrong.counts.fp[1] == 1);
  CHECK(wrong.counts.fn[0] == 1);
  CHECK(wrong.counts.tp[0] == 0);

  // IoU exactly at the threshold does not count (strict inequality).
  auto edge = match_detections({make_det(0, 0, 0, 2, 1, 0, 0.9)},
                               {make_gt(0, 1, 0, 2, 1, 0)}, 0.5, 1);
  CHECK(edge.counts.tp[0] == 0);
  CHECK(edge.counts.fp[0] == 1);

  // Matching never crosses images.
  auto cross = match_detections({make_det(0, 0, 0, 1, 1, 0, 0.9)},
                                {make_gt(1, 0, 0, 1, 1, 0)}, 0.5, 1);
  CHECK(cross.counts.tp[0] == 0);
  CHECK(cross.counts.fn[0] == 1);

  // Equal confidences process in input order.
  auto ties = match_detections(
      {make_det(0, 0, 0, 1, 1, 0, 0.5), make_det(0, 0, 0, 1, 1, 0, 0.5)},
      {make_gt(0, 0, 0, 1, 1, 0)}, 0.4, 1);
  CHECK(ties.order[0] == 0);
  CHECK(ties.is_tp[0] == 1);
  CHECK(ties.is_tp[1] == 0);
}

TEST_CASE("average precision pinned examples") {
  CHECK(average_precision({1}, 1) == doctest::Approx(1.0));
  CHECK(average_precision({1, 0, 1}, 2) == doctest::Approx(0.5 + 0.5 * (2.0 / 3.0)).epsilon(1e-12));
  CHECK(average_precision({0, 0, 0}, 2) == doctest::Approx(0.0));
  CHECK(average_precision({}, 3) == doctest::Approx(0.0));
  CHECK_THROWS_AS(average_precision({1}, 0), DataError);
}

TEST_CASE("average precision matches the brute-force oracle exhaustively") {
  for (int n = 1; n <= 8; ++n) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::vector<char> ranked;
      int tp = 0;
      for (int i = 0; i < n; ++i) {
        const char bit = (mask >> i) & 1;
        ranked.push_back(bit);
        tp += bit;
      }
      for (long long gt : {1, 4, 9}) {
        if (tp > gt) continue;
        CHECK(average_precision(ranked, gt) == doctest::Approx(ap_oracle(ranked, gt)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("map_at: perfect detector scores 1.0 everywhere") {
  std::vector<GroundTruthRecord> gts{make_gt(0, 0, 0, 1, 1, 0), make_gt(0, 2, 2, 3, 3, 1),
                                     make_gt(1, 0, 0, 2, 2, 0)};
  std::vector<DetectionRecord> dets;
  for (const auto& g : gts) {
    DetectionRecord d;
    d.image_id = g.image_id;
    d.det.box = g.box;
    d.det.class_id = g.box.class_id;
    d.det.confidence = 0.9;
    dets.push_back(d);
  }
  EvalReport report = map_at(dets, gts, 3);
  for (const auto& [t, v] : report.map_by_threshold) CHECK(v == doctest::Approx(1.0));
  CHECK(report.per_class[0].scored);
  CHECK(report.per_class[1].scored);
  CHECK_FALSE(report.per_class[2].scored);
  CHECK(report.per_class[2].ap.empty());

  CHECK_THROWS_AS(map_at(dets, {}, 3), DataError);
}

TEST_CASE("map is non-increasing in the IoU threshold on random scenes") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<GroundTruthRecord> gts;
    std::vector<DetectionRecord> dets;
    const int images = rng.uniform_int(1, 3);
    for (int img = 0; img < images; ++img) {
      const int n = rng.uniform_int(1, 5);
      for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(0.0, 6.0), y = rng.uniform(0.0, 6.0);
        const double w = rng.uniform(0.5, 2.0), h = rng.uniform(0.5, 2.0);
        const int cls = rng.uniform_int(0, 2);
        gts.push_back(make_gt(img, x, y, x + w, y + h, cls));
        if (rng.bernoulli(0.8)) {
          const double jx = rng.uniform(-0.4, 0.4), jy = rng.uniform(-0.4, 0.4);
          dets.push_back(make_det(img, x + jx, y + jy, x + w + jx, y + h + jy, cls,
                                  rng.uniform(0.1, 0.99)));
        }
      }
      const int noise = rng.uniform_int(0, 3);
      for (int i = 0; i < noise; ++i) {
        const double x = rng.uniform(0.0, 6.0), y = rng.uniform(0.0, 6.0);
        dets.push_back(make_det(img, x, y, x + rng.uniform(0.5, 2.0), y + rng.uniform(0.5, 2.0),
                                rng.uniform_int(0, 2), rng.uniform(0.1, 0.99)));
      }
    }
    EvalReport report = map_at(dets, gts, 3, {0.2, 0.4, 0.5});
    double prev = 1.0 + 1e-12;
    for (const auto& [t, v] : report.map_by_threshold) {
      CHECK(v <= prev + 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("eval report JSON round trip and schema validation") {
  EvalReport report;
  report.dataset = "bench";
  report.partition = "test";
  report.map_by_threshold = {{0.2, 41.07}, {0.4, 38.60}, {0.5, 35.56}};
  ClassEval ce;
  ce.gt_count = 12;
  ce.scored = true;
  ce.ap = {{0.2, 0.52}, {0.4, 0.41}, {0.5, 0.35}};
  ce.tp = {{0.2, 9}, {0.4, 8}, {0.5, 6}};
  ce.fp = {{0.2, 4}, {0.4, 5}, {0.5, 7}};
  ce.fn = {{0.2, 3}, {0.4, 4}, {0.5, 6}};
  report.per_class[0] = ce;
  ClassEval unscored;
  unscored.gt_count = 0;
  unscored.scored = false;
  report.per_class[1] = unscored;

  nlohmann::json j = report.to_json();
  EvalReport::validate_json(j);
  EvalReport back = EvalReport::from_json(j);
  CHECK(back.dataset == report.dataset);
  CHECK(back.partition == report.partition);
  CHECK_FALSE(back.macro_f1.has_value());
  CHECK(back.map_by_threshold == report.map_by_threshold);
  CHECK(back.per_class[0].ap == ce.ap);
  CHECK(back.per_class[0].tp == ce.tp);
  CHECK(back.per_class[1].scored == false);

  // The threshold sequence in the fixture is ordered loosest to strictest and
  // its mAPs never rise.
  double prev = 1e18;
  for (const auto& [t, v] : back.map_by_threshold) {
    CHECK(v <= prev);
    prev = v;
  }

  nlohmann::json broken = j;
  broken.erase("thresholds");
  CHECK_THROWS_AS(EvalReport::validate_json(broken), ParseError);
  nlohmann::json bad_type = j;
  bad_type["macro_f1"] = "high";
  CHECK_THROWS_AS(EvalReport::validate_json(bad_type), ParseError);

  report.macro_f1 = 0.87;
  nlohmann::json j2 = report.to_json();
  CHECK(EvalReport::from_json(j2).macro_f1.value() == doctest::Approx(0.87));
}

TEST_CASE("pr curve emission") {
  PRCurve curve = pr_curve({1, 0, 1}, 2, 3, 0.5);
  REQUIRE(curve.points.size() == 3);
  CHECK(curve.points[0].first == doctest::Approx(0.5));
  CHECK(curve.points[0].second == doctest::Approx(1.0));
  CHECK(curve.points[2].first == doctest::Approx(1.0));
  CHECK(curve.points[2].second == doctest::Approx(2.0 / 3.0));

  const std::string csv = pr_curve_csv({curve});
  CHECK(csv.find("class_id,iou_threshold,recall,precision") == 0);
  CHECK(csv.find("3,0.5,0.5,1") != std::string::npos);
}
