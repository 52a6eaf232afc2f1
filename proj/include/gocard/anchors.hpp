#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace gocard {

// Width/height prior set, sorted by area ascending.
struct AnchorSet {
  std::vector<std::pair<double, double>> pairs;
  void validate() const;
  int size() const { return static_cast<int>(pairs.size()); }
};

// IoU of two boxes sharing a center; the distance metric used for anchor
// clustering and anchor assignment.
double anchor_iou(double w1, double h1, double w2, double h2);

// Lloyd iterations under the 1-IoU distance with farthest-point seeding.
// Deterministic for a fixed seed. Appends the mean-cost value after each
// iteration to cost_trace when provided; the sequence is non-increasing (an
// update that would raise the cost is reverted and iteration stops).
AnchorSet kmeans_anchors(const std::vector<std::pair<double, double>>& boxes, int k,
                         std::uint64_t seed, std::vector<double>* cost_trace = nullptr);

}  // namespace gocard
