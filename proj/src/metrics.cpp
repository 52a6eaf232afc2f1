#include "gocard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gocard/errors.hpp"

namespace gocard {

namespace {

std::string threshold_key(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", t);
  return buf;
}

}  // namespace

double f1_macro(const std::vector<int>& predictions, const std::vector<int>& targets,
                int num_classes) {
  if (predictions.size() != targets.size()) {
    throw DataError("prediction/target length mismatch: " + std::to_string(predictions.size()) +
                    " vs " + std::to_string(targets.size()));
  }
  ConfusionCounts counts(num_classes);
  std::vector<char> present(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int t = targets[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes) {
      throw DataError("class id outside [0, " + std::to_string(num_classes) + ")");
    }
    present[static_cast<std::size_t>(p)] = 1;
    present[static_cast<std::size_t>(t)] = 1;
    if (p == t) {
      ++counts.tp[static_cast<std::size_t>(p)];
    } else {
      ++counts.fp[static_cast<std::size_t>(p)];
      ++counts.fn[static_cast<std::size_t>(t)];
    }
  }
  double total = 0.0;
  int scored = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (!present[static_cast<std::size_t>(c)]) continue;  // absent from both sides
    const auto ci = static_cast<std::size_t>(c);
    const long long denom = 2 * counts.tp[ci] + counts.fp[ci] + counts.fn[ci];
    total += denom == 0 ? 0.0 : 2.0 * counts.tp[ci] / static_cast<double>(denom);
    ++scored;
  }
  return scored == 0 ? 0.0 : total / scored;
}

MatchResult match_detections(const std::vector<DetectionRecord>& detections,
                             const std::vector<GroundTruthRecord>& ground_truth,
                             double iou_threshold, int num_classes) {
  MatchResult result;
  result.counts = ConfusionCounts(num_classes);
  result.is_tp.assign(detections.size(), 0);
  result.order.resize(detections.size());
  std::iota(result.order.begin(), result.order.end(), 0);
  std::stable_sort(result.order.begin(), result.order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].det.confidence > detections[b].det.confidence;
  });

  std::vector<char> gt_matched(ground_truth.size(), 0);
  for (std::size_t idx : result.order) {
    const DetectionRecord& rec = detections[idx];
    if (rec.det.class_id < 0 || rec.det.class_id >= num_classes) {
      throw DataError("detection class id outside [0, " + std::to_string(num_classes) + ")");
    }
    double best_iou = 0.0;
    std::size_t best_gt = ground_truth.size();
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (gt_matched[g] || ground_truth[g].image_id != rec.image_id ||
          ground_truth[g].box.class_id != rec.det.class_id) {
        continue;
      }
      const double v = iou(rec.det.box, ground_truth[g].box);
      if (v > best_iou) {
        best_iou = v;
        best_gt = g;
      }
    }
    if (best_gt < ground_truth.size() && best_iou > iou_threshold) {
      gt_matched[best_gt] = 1;
      result.is_tp[idx] = 1;
      ++result.counts.tp[static_cast<std::size_t>(rec.det.class_id)];
    } else {
      ++result.counts.fp[static_cast<std::size_t>(rec.det.class_id)];
    }
  }
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    const int c = ground_truth[g].box.class_id;
    if (c < 0 || c >= num_classes) {
      throw DataError("ground-truth class id outside [0, " + std::to_string(num_classes) + ")");
    }
    if (!gt_matched[g]) ++result.counts.fn[static_cast<std::size_t>(c)];
  }
  return result;
}

double average_precision(const std::vector<char>& ranked_tp, long long num_gt) {
  if (num_gt <= 0) throw DataError("average precision needs at least one ground-truth instance");
  const std::size_t n = ranked_tp.size();
  if (n == 0) return 0.0;
  std::vector<double> recall(n), precision(n);
  long long tp_cum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_tp[i]) ++tp_cum;
    recall[i] = static_cast<double>(tp_cum) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tp_cum) / static_cast<double>(i + 1);
  }
  // p_interp(r) = max precision at recall >= r, folded in with a reverse scan.
  double ap = 0.0;
  double pmax = 0.0;
  std::vector<double> pinterp(n);
  for (std::size_t i = n; i-- > 0;) {
    pmax = std::max(pmax, precision[i]);
    pinterp[i] = pmax;
  }
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * pinterp[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

PRCurve pr_curve(const std::vector<char>& ranked_tp, long long num_gt, int class_id,
                 double iou_threshold) {
  if (num_gt <= 0) throw DataError("PR curve needs at least one ground-truth instance");
  PRCurve curve;
  curve.class_id = class_id;
  curve.iou_threshold = iou_threshold;
  long long tp_cum = 0;
  for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
    if (ranked_tp[i]) ++tp_cum;
    curve.points.push_back({static_cast<double>(tp_cum) / static_cast<double>(num_gt),
                            static_cast<double>(tp_cum) / static_cast<double>(i + 1)});
  }
  return curve;
}

std::string pr_curve_csv(const std::vector<PRCurve>& curves) {
  std::ostringstream out;
  out << "class_id,iou_threshold,recall,precision\n";
  for (const auto& c : curves) {
    for (const auto& [r, p] : c.points) {
      out << c.class_id << ',' << threshold_key(c.iou_threshold) << ',' << r << ',' << p << '\n';
    }
  }
  return out.str();
}

EvalReport map_at(const std::vector<DetectionRecord>& detections,
                  const std::vector<GroundTruthRecord>& ground_truth, int num_classes,
                  const std::vector<double>& thresholds) {
  if (ground_truth.empty()) throw DataError("evaluation needs a nonempty ground-truth set");
  if (thresholds.empty()) throw ConfigError("evaluation needs at least one IoU threshold");

  EvalReport report;
  std::vector<long long> gt_count(static_cast<std::size_t>(num_classes), 0);
  for (const auto& g : ground_truth) {
    if (g.box.class_id < 0 || g.box.class_id >= num_classes) {
      throw DataError("ground-truth class id outside [0, " + std::to_string(num_classes) + ")");
    }
    ++gt_count[static_cast<std::size_t>(g.box.class_id)];
  }
  for (int c = 0; c < num_classes; ++c) {
    ClassEval ce;
    ce.gt_count = gt_count[static_cast<std::size_t>(c)];
    ce.scored = ce.gt_count > 0;
    report.per_class[c] = ce;
  }

  for (double t : thresholds) {
    MatchResult match = match_detections(detections, ground_truth, t, num_classes);
    // Ranked outcome list per class, in global processing order.
    std::vector<std::vector<char>> ranked(static_cast<std::size_t>(num_classes));
    for (std::size_t idx : match.order) {
      const int c = detections[idx].det.class_id;
      ranked[static_cast<std::size_t>(c)].push_back(match.is_tp[idx]);
    }
    double ap_total = 0.0;
    int scored = 0;
    for (int c = 0; c < num_classes; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      ClassEval& ce = report.per_class[c];
      ce.tp[t] = match.counts.tp[ci];
      ce.fp[t] = match.counts.fp[ci];
      ce.fn[t] = match.counts.fn[ci];
      if (!ce.scored) continue;
      const double ap = average_precision(ranked[ci], ce.gt_count);
      ce.ap[t] = ap;
      ap_total += ap;
      ++scored;
    }
    report.map_by_threshold[t] = scored == 0 ? 0.0 : ap_total / scored;
  }
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["partition"] = partition;
  if (macro_f1) {
    j["macro_f1"] = *macro_f1;
  } else {
    j["macro_f1"] = nullptr;
  }
  nlohmann::json th = nlohmann::json::object();
  for (const auto& [t, v] : map_by_threshold) th[threshold_key(t)] = v;
  j["thresholds"] = th;
  nlohmann::json pc = nlohmann::json::object();
  for (const auto& [c, ce] : per_class) {
    nlohmann::json e;
    e["gt"] = ce.gt_count;
    e["scored"] = ce.scored;
    nlohmann::json ap = nlohmann::json::object(), tp = nlohmann::json::object(),
                   fp = nlohmann::json::object(), fn = nlohmann::json::object();
    for (const auto& [t, v] : ce.ap) ap[threshold_key(t)] = v;
    for (const auto& [t, v] : ce.tp) tp[threshold_key(t)] = v;
    for (const auto& [t, v] : ce.fp) fp[threshold_key(t)] = v;
    for (const auto& [t, v] : ce.fn) fn[threshold_key(t)] = v;
    e["ap"] = ap;
    e["tp"] = tp;
    e["fp"] = fp;
    e["fn"] = fn;
    pc[std::to_string(c)] = e;
  }
  j["per_class"] = pc;
  return j;
}

void EvalReport::validate_json(const nlohmann::json& j) {
  auto need = [&](const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("report missing field '") + key + "'");
  };
  need("dataset");
  need("partition");
  need("macro_f1");
  need("thresholds");
  need("per_class");
  if (!j["dataset"].is_string() || !j["partition"].is_string()) {
    throw ParseError("report dataset/partition must be strings");
  }
  if (!j["macro_f1"].is_null() && !j["macro_f1"].is_number()) {
    throw ParseError("report macro_f1 must be a number or null");
  }
  if (!j["thresholds"].is_object() || j["thresholds"].empty()) {
    throw ParseError("report thresholds must be a nonempty object");
  }
  for (const auto& [key, value] : j["thresholds"].items()) {
    if (!value.is_number()) throw ParseError("threshold mAP '" + key + "' must be a number");
  }
  if (!j["per_class"].is_object()) throw ParseError("report per_class must be an object");
  for (const auto& [key, entry] : j["per_class"].items()) {
    for (const char* field : {"gt", "scored", "ap", "tp", "fp", "fn"}) {
      if (!entry.contains(field)) {
        throw ParseError("per_class entry '" + key + "' missing field '" + field + "'");
      }
    }
    if (!entry["gt"].is_number_integer() || !entry["scored"].is_boolean()) {
      throw ParseError("per_class entry '" + key + "' has malformed gt/scored");
    }
    for (const char* field : {"ap", "tp", "fp", "fn"}) {
      if (!entry[field].is_object()) {
        throw ParseError("per_class entry '" + key + "' field '" + field + "' must be an object");
      }
    }
  }
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  validate_json(j);
  EvalReport report;
  report.dataset = j["dataset"].get<std::string>();
  report.partition = j["partition"].get<std::string>();
  if (!j["macro_f1"].is_null()) report.macro_f1 = j["macro_f1"].get<double>();
  for (const auto& [key, value] : j["thresholds"].items()) {
    report.map_by_threshold[std::stod(key)] = value.get<double>();
  }
  for (const auto& [key, entry] : j["per_class"].items()) {
    ClassEval ce;
    ce.gt_count = entry["gt"].get<long long>();
    ce.scored = entry["scored"].get<bool>();
    for (const auto& [t, v] : entry["ap"].items()) ce.ap[std::stod(t)] = v.get<double>();
    for (const auto& [t, v] : entry["tp"].items()) ce.tp[std::stod(t)] = v.get<long long>();
    for (const auto& [t, v] : entry["fp"].items()) ce.fp[std::stod(t)] = v.get<long long>();
    for (const auto& [t, v] : entry["fn"].items()) ce.fn[std::stod(t)] = v.get<long long>();
    report.per_class[std::stoi(key)] = ce;
  }
  return report;
}

}  // namespace gocard
