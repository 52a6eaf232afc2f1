#include "gocard/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gocard/errors.hpp"

namespace gocard {

namespace {

constexpr double kSaturatedLogit = 18.0;  // sigmoid(18) is 1 within 2e-8

void check_annotation(const GroundTruthBox& g, int num_classes) {
  if (g.class_id < 0 || g.class_id >= num_classes) {
    throw DataError("annotation class " + std::to_string(g.class_id) + " outside [0, " +
                    std::to_string(num_classes) + ")");
  }
  if (!(g.w > 0.0) || !(g.h > 0.0)) throw DataError("annotation box must have positive size");
  if (g.cx < 0.0 || g.cx > 1.0 || g.cy < 0.0 || g.cy > 1.0) {
    throw DataError("annotation center must lie in the unit image");
  }
}

int cell_of(double coord, int grid_size) {
  return std::min(static_cast<int>(coord * grid_size), grid_size - 1);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

struct SlotPlan {
  int cell_y = 0;
  int cell_x = 0;
  int anchor = -1;
  const GroundTruthBox* box = nullptr;
};

// Shared slot assignment for encode_targets and inverse_encode: center cell,
// best free anchor by IoU, fall through to the next-best free anchor.
std::vector<SlotPlan> plan_slots(const std::vector<GroundTruthBox>& annotations, int grid_size,
                                 const AnchorSet& anchors, int num_classes, int* dropped) {
  const int a = anchors.size();
  std::vector<char> taken(static_cast<std::size_t>(grid_size * grid_size * a), 0);
  std::vector<SlotPlan> plans;
  if (dropped) *dropped = 0;
  for (const auto& g : annotations) {
    check_annotation(g, num_classes);
    SlotPlan plan;
    plan.cell_x = cell_of(g.cx, grid_size);
    plan.cell_y = cell_of(g.cy, grid_size);
    plan.box = &g;

    std::vector<int> order(static_cast<std::size_t>(a));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
      return anchor_iou(g.w, g.h, anchors.pairs[static_cast<std::size_t>(lhs)].first,
                        anchors.pairs[static_cast<std::size_t>(lhs)].second) >
             anchor_iou(g.w, g.h, anchors.pairs[static_cast<std::size_t>(rhs)].first,
                        anchors.pairs[static_cast<std::size_t>(rhs)].second);
    });
    for (int cand : order) {
      auto& flag = taken[static_cast<std::size_t>((plan.cell_y * grid_size + plan.cell_x) * a + cand)];
      if (!flag) {
        flag = 1;
        plan.anchor = cand;
        break;
      }
    }
    if (plan.anchor < 0) {
      if (dropped) ++*dropped;
      continue;
    }
    plans.push_back(plan);
  }
  return plans;
}

}  // namespace

EncodeResult encode_targets(const std::vector<GroundTruthBox>& annotations, int grid_size,
                            const AnchorSet& anchors, int num_classes) {
  if (grid_size <= 0) throw ConfigError("grid size must be positive");
  if (num_classes <= 0) throw ConfigError("num_classes must be positive");
  anchors.validate();
  const int a = anchors.size();
  const int slot = 5 + num_classes;

  EncodeResult result;
  result.target = Tensor::zeros({grid_size, grid_size, a * slot});
  auto vals = result.target.mutable_values();
  for (const auto& plan : plan_slots(annotations, grid_size, anchors, num_classes,
                                     &result.dropped)) {
    const GroundTruthBox& g = *plan.box;
    const auto& [aw, ah] = anchors.pairs[static_cast<std::size_t>(plan.anchor)];
    double* p = vals.data() +
                static_cast<std::ptrdiff_t>((plan.cell_y * grid_size + plan.cell_x) * a * slot +
                                            plan.anchor * slot);
    p[0] = g.cx * grid_size - plan.cell_x;
    p[1] = g.cy * grid_size - plan.cell_y;
    p[2] = std::log(g.w / aw);
    p[3] = std::log(g.h / ah);
    p[4] = 1.0;
    p[5 + g.class_id] = 1.0;
  }
  return result;
}

Tensor inverse_encode(const std::vector<GroundTruthBox>& annotations, int grid_size,
                      const AnchorSet& anchors, int num_classes) {
  if (grid_size <= 0) throw ConfigError("grid size must be positive");
  anchors.validate();
  const int a = anchors.size();
  const int slot = 5 + num_classes;

  Tensor raw = Tensor::full({grid_size, grid_size, a * slot}, 0.0);
  auto vals = raw.mutable_values();
  // Silence every objectness logit first.
  for (int cell = 0; cell < grid_size * grid_size; ++cell) {
    for (int ai = 0; ai < a; ++ai) {
      vals[static_cast<std::size_t>((cell * a + ai) * slot + 4)] = -kSaturatedLogit;
    }
  }
  for (const auto& plan : plan_slots(annotations, grid_size, anchors, num_classes, nullptr)) {
    const GroundTruthBox& g = *plan.box;
    const auto& [aw, ah] = anchors.pairs[static_cast<std::size_t>(plan.anchor)];
    double* p = vals.data() +
                static_cast<std::ptrdiff_t>((plan.cell_y * grid_size + plan.cell_x) * a * slot +
                                            plan.anchor * slot);
    const double fx = g.cx * grid_size - plan.cell_x;
    const double fy = g.cy * grid_size - plan.cell_y;
    // Fractions at the sigmoid's closed ends cannot be hit exactly; nudge
    // inside by an amount far below the round-trip tolerance.
    const double eps = 1e-9;
    p[0] = logit(std::clamp(fx, eps, 1.0 - eps));
    p[1] = logit(std::clamp(fy, eps, 1.0 - eps));
    p[2] = std::log(g.w / aw);
    p[3] = std::log(g.h / ah);
    p[4] = kSaturatedLogit;
    for (int c = 0; c < num_classes; ++c) {
      p[5 + c] = c == g.class_id ? 2.0 * kSaturatedLogit : 0.0;
    }
  }
  return raw;
}

std::vector<Detection> decode(const Tensor& raw, const AnchorSet& anchors, int num_classes,
                              double conf_threshold) {
  anchors.validate();
  const Shape& shape = raw.shape();
  const int a = anchors.size();
  const int slot = 5 + num_classes;
  if (shape.size() != 3 || shape[0] != shape[1] || shape[2] != a * slot) {
    throw GeometryError("decode expects (S, S, " + std::to_string(a * slot) + "), got " +
                        shape_str(shape));
  }
  const int s = shape[0];

  std::vector<Detection> detections;
  std::vector<double> probs(static_cast<std::size_t>(num_classes));
  const auto vals = raw.values();
  for (int cy = 0; cy < s; ++cy) {
    for (int cx = 0; cx < s; ++cx) {
      for (int ai = 0; ai < a; ++ai) {
        const double* p = vals.data() +
                          static_cast<std::ptrdiff_t>(((cy * s + cx) * a + ai) * slot);
        double mx = p[5];
        for (int c = 1; c < num_classes; ++c) mx = std::max(mx, p[5 + c]);
        double total = 0.0;
        for (int c = 0; c < num_classes; ++c) {
          probs[static_cast<std::size_t>(c)] = std::exp(p[5 + c] - mx);
          total += probs[static_cast<std::size_t>(c)];
        }
        int best_class = 0;
        double best_prob = probs[0];
        for (int c = 1; c < num_classes; ++c) {
          if (probs[static_cast<std::size_t>(c)] > best_prob) {
            best_prob = probs[static_cast<std::size_t>(c)];
            best_class = c;
          }
        }
        best_prob /= total;
        const double obj = 1.0 / (1.0 + std::exp(-p[4]));
        const double conf = obj * best_prob;
        if (conf < conf_threshold) continue;

        const double bx = (cx + 1.0 / (1.0 + std::exp(-p[0]))) / s;
        const double by = (cy + 1.0 / (1.0 + std::exp(-p[1]))) / s;
        const auto& [aw, ah] = anchors.pairs[static_cast<std::size_t>(ai)];
        const double bw = aw * std::exp(p[2]);
        const double bh = ah * std::exp(p[3]);

        Detection det;
        det.box = BoundingBox::from_center(bx, by, bw, bh, best_class);
        det.box.x_min = std::clamp(det.box.x_min, 0.0, 1.0);
        det.box.x_max = std::clamp(det.box.x_max, 0.0, 1.0);
        det.box.y_min = std::clamp(det.box.y_min, 0.0, 1.0);
        det.box.y_max = std::clamp(det.box.y_max, 0.0, 1.0);
        det.class_id = best_class;
        det.confidence = conf;
        detections.push_back(det);
      }
    }
  }
  return detections;
}

}  // namespace gocard
