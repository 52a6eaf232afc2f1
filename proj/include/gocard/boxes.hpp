#pragma once

#include <vector>

namespace gocard {

// Axis-aligned box, corner form. Coordinates are either pixels or normalized
// [0,1]; the geometry below is unit-agnostic.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  int class_id = -1;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  // Degenerate (non-positive area) boxes are rejected here; loaders call this
  // before anything downstream sees the box.
  void validate() const;

  static BoundingBox from_center(double cx, double cy, double w, double h, int class_id = -1);
};

// Center-form normalized annotation, as stored on disk.
struct GroundTruthBox {
  int class_id = -1;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  BoundingBox to_box() const { return BoundingBox::from_center(cx, cy, w, h, class_id); }
  bool operator==(const GroundTruthBox&) const = default;
};

double iou(const BoundingBox& a, const BoundingBox& b);

struct Detection {
  BoundingBox box;
  int class_id = -1;
  double confidence = 0.0;
};

// Greedy per-class suppression. Output sorted by confidence descending, ties
// broken by lower class_id then input order.
std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold = 0.45);

}  // namespace gocard
