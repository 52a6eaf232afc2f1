#pragma once

#include <vector>

#include "gocard/anchors.hpp"
#include "gocard/boxes.hpp"
#include "gocard/tensor.hpp"

namespace gocard {

// Per-slot layout in grid tensors: [x-offset, y-offset, log-w, log-h,
// objectness, one-hot classes]. Offsets are the box center's fractional
// position inside its cell; sizes are relative to the matched anchor.

struct EncodeResult {
  Tensor target;  // (S, S, A*(5+C))
  int dropped = 0;  // boxes that found no free slot
};

// Assigns each box to the cell containing its center and the free anchor with
// the highest co-centered IoU; an occupied slot falls through to the next-best
// free anchor in that cell.
EncodeResult encode_targets(const std::vector<GroundTruthBox>& annotations, int grid_size,
                            const AnchorSet& anchors, int num_classes);

// Raw network outputs that decode back to the given annotations: the analytic
// inverse of the decode parameterization, with saturated objectness and class
// logits.
Tensor inverse_encode(const std::vector<GroundTruthBox>& annotations, int grid_size,
                      const AnchorSet& anchors, int num_classes);

// center = (cell + sigmoid(t))/S, size = anchor*exp(t), confidence =
// sigmoid(t_obj)*max softmax class; boxes clamped to the unit image, entries
// below conf_threshold dropped.
std::vector<Detection> decode(const Tensor& raw, const AnchorSet& anchors, int num_classes,
                              double conf_threshold = 0.05);

}  // namespace gocard
