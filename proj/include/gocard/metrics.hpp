#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gocard/boxes.hpp"

namespace gocard {

// Per-class true/false positive and false negative tallies.
struct ConfusionCounts {
  std::vector<long long> tp;
  std::vector<long long> fp;
  std::vector<long long> fn;

  explicit ConfusionCounts(int num_classes = 0)
      : tp(static_cast<std::size_t>(num_classes), 0),
        fp(static_cast<std::size_t>(num_classes), 0),
        fn(static_cast<std::size_t>(num_classes), 0) {}
  int num_classes() const { return static_cast<int>(tp.size()); }
};

// Unweighted mean over classes of 2TP/(2TP+FP+FN). Classes absent from both
// predictions and targets are excluded from the mean.
double f1_macro(const std::vector<int>& predictions, const std::vector<int>& targets,
                int num_classes);

// A detection paired with the image it came from; matching never crosses
// images.
struct DetectionRecord {
  int image_id = 0;
  Detection det;
};

struct GroundTruthRecord {
  int image_id = 0;
  BoundingBox box;  // class in box.class_id
};

struct MatchResult {
  ConfusionCounts counts;
  // Aligned with the input detections: true where the detection consumed a GT.
  std::vector<char> is_tp;
  // Processing order: confidence descending, ties by input position.
  std::vector<std::size_t> order;
};

// Greedy confidence-descending matching: a detection is TP when some
// still-unmatched same-class GT in its image overlaps above the threshold
// (best-overlap GT is consumed), otherwise FP; leftover GT count as FN.
MatchResult match_detections(const std::vector<DetectionRecord>& detections,
                             const std::vector<GroundTruthRecord>& ground_truth,
                             double iou_threshold, int num_classes);

// All-point interpolated AP over a ranked TP/FP outcome list for one class.
double average_precision(const std::vector<char>& ranked_tp, long long num_gt);

struct PRCurve {
  int class_id = -1;
  double iou_threshold = 0.0;
  std::vector<std::pair<double, double>> points;  // (recall, precision) along the ranking
};

PRCurve pr_curve(const std::vector<char>& ranked_tp, long long num_gt, int class_id,
                 double iou_threshold);
std::string pr_curve_csv(const std::vector<PRCurve>& curves);

struct ClassEval {
  long long gt_count = 0;
  bool scored = false;                 // false when the class has no GT
  std::map<double, double> ap;         // threshold -> AP (scored classes only)
  std::map<double, long long> tp;      // threshold -> counts
  std::map<double, long long> fp;
  std::map<double, long long> fn;
};

struct EvalReport {
  std::map<double, double> map_by_threshold;
  std::map<int, ClassEval> per_class;
  std::optional<double> macro_f1;
  std::string dataset;
  std::string partition;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  // Throws ParseError when the JSON does not follow the documented layout.
  static void validate_json(const nlohmann::json& j);
};

// mAP at each threshold = unweighted mean AP over classes with at least one GT
// instance. Classes without GT appear in the report as unscored.
EvalReport map_at(const std::vector<DetectionRecord>& detections,
                  const std::vector<GroundTruthRecord>& ground_truth, int num_classes,
                  const std::vector<double>& thresholds = {0.2, 0.4, 0.5});

}  // namespace gocard
