#include "gocard/boxes.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gocard/errors.hpp"

namespace gocard {

void BoundingBox::validate() const {
  if (!(x_max > x_min) || !(y_max > y_min)) {
    throw ContractError("degenerate bounding box (" + std::to_string(x_min) + "," +
                        std::to_string(y_min) + "," + std::to_string(x_max) + "," +
                        std::to_string(y_max) + ")");
  }
}

BoundingBox BoundingBox::from_center(double cx, double cy, double w, double h, int class_id) {
  BoundingBox b;
  b.x_min = cx - 0.5 * w;
  b.x_max = cx + 0.5 * w;
  b.y_min = cy - 0.5 * h;
  b.y_max = cy + 0.5 * h;
  b.class_id = class_id;
  return b;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (detections[a].confidence != detections[b].confidence) {
      return detections[a].confidence > detections[b].confidence;
    }
    if (detections[a].class_id != detections[b].class_id) {
      return detections[a].class_id < detections[b].class_id;
    }
    return a < b;
  });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const Detection& cand = detections[idx];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id == cand.class_id && iou(k.box, cand.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace gocard
