#include "gocard/anchors.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "gocard/errors.hpp"
#include "gocard/rng.hpp"

namespace gocard {

void AnchorSet::validate() const {
  if (pairs.empty()) throw ConfigError("anchor set cannot be empty");
  double prev_area = 0.0;
  for (const auto& [w, h] : pairs) {
    if (!(w > 0.0) || !(h > 0.0)) throw ConfigError("anchor dims must be positive");
    const double area = w * h;
    if (area < prev_area) throw ConfigError("anchor set must be sorted by area ascending");
    prev_area = area;
  }
}

double anchor_iou(double w1, double h1, double w2, double h2) {
  const double inter = std::min(w1, w2) * std::min(h1, h2);
  return inter / (w1 * h1 + w2 * h2 - inter);
}

namespace {

double assignment_cost(const std::vector<std::pair<double, double>>& boxes,
                       const std::vector<std::pair<double, double>>& centroids,
                       std::vector<int>* assign) {
  double total = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    double best = -1.0;
    int best_k = 0;
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      const double v = anchor_iou(boxes[i].first, boxes[i].second, centroids[k].first,
                                  centroids[k].second);
      if (v > best) {
        best = v;
        best_k = static_cast<int>(k);
      }
    }
    total += 1.0 - best;
    if (assign) (*assign)[i] = best_k;
  }
  return total / static_cast<double>(boxes.size());
}

}  // namespace

AnchorSet kmeans_anchors(const std::vector<std::pair<double, double>>& boxes, int k,
                         std::uint64_t seed, std::vector<double>* cost_trace) {
  if (k <= 0) throw ConfigError("anchor count must be positive");
  if (static_cast<int>(boxes.size()) < k) {
    throw DataError("need at least " + std::to_string(k) + " boxes to craft " + std::to_string(k) +
                    " anchors, got " + std::to_string(boxes.size()));
  }
  std::set<std::pair<double, double>> distinct(boxes.begin(), boxes.end());
  if (static_cast<int>(distinct.size()) < k) {
    throw DataError("degenerate clusters: only " + std::to_string(distinct.size()) +
                    " distinct box sizes for k=" + std::to_string(k));
  }
  for (const auto& [w, h] : boxes) {
    if (!(w > 0.0) || !(h > 0.0)) throw DataError("box dims must be positive for anchor crafting");
  }

  // Farthest-point seeding: random first pick, then repeatedly the box whose
  // best-IoU distance to the chosen set is largest (ties: lowest index).
  Rng rng(seed);
  std::vector<std::pair<double, double>> centroids;
  centroids.push_back(boxes[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<int>(boxes.size()) - 1))]);
  while (static_cast<int>(centroids.size()) < k) {
    double far_dist = -1.0;
    std::size_t far_idx = 0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      double nearest = 1.0;
      for (const auto& c : centroids) {
        nearest = std::min(nearest, 1.0 - anchor_iou(boxes[i].first, boxes[i].second, c.first,
                                                     c.second));
      }
      if (nearest > far_dist) {
        far_dist = nearest;
        far_idx = i;
      }
    }
    centroids.push_back(boxes[far_idx]);
  }

  std::vector<int> assign(boxes.size(), -1);
  double cost = assignment_cost(boxes, centroids, &assign);
  if (cost_trace) cost_trace->push_back(cost);

  for (int iter = 0; iter < 300; ++iter) {
    // Mean update per cluster; empty clusters keep their centroid.
    std::vector<std::pair<double, double>> next(centroids);
    std::vector<double> wsum(static_cast<std::size_t>(k), 0.0);
    std::vector<double> hsum(static_cast<std::size_t>(k), 0.0);
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto ki = static_cast<std::size_t>(assign[i]);
      wsum[ki] += boxes[i].first;
      hsum[ki] += boxes[i].second;
      ++count[ki];
    }
    for (std::size_t ki = 0; ki < static_cast<std::size_t>(k); ++ki) {
      if (count[ki] > 0) next[ki] = {wsum[ki] / count[ki], hsum[ki] / count[ki]};
    }

    std::vector<int> next_assign(boxes.size(), -1);
    const double next_cost = assignment_cost(boxes, next, &next_assign);
    // The mean step is not guaranteed to lower a 1-IoU objective; a worsening
    // update is discarded so the recorded cost never rises.
    if (next_cost > cost) break;
    const bool converged = next_cost == cost && next_assign == assign;
    centroids = std::move(next);
    assign = std::move(next_assign);
    cost = next_cost;
    if (cost_trace) cost_trace->push_back(cost);
    if (converged) break;
  }

  AnchorSet result;
  result.pairs = std::move(centroids);
  std::sort(result.pairs.begin(), result.pairs.end(), [](const auto& a, const auto& b) {
    return a.first * a.second < b.first * b.second;
  });
  result.validate();
  return result;
}

}  // namespace gocard
