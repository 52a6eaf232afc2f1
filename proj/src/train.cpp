#include "gocard/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "gocard/checkpoint.hpp"
#include "gocard/codec.hpp"
#include "gocard/errors.hpp"

namespace gocard {

std::string optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kAdam:
      return "adam";
    case OptimizerKind::kSgd:
      return "sgd";
  }
  throw ConfigError("unknown optimizer kind");
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
}

void StageSchedule::validate() const {
  if (stage1_epochs < 0 || stage2_max_epochs < 0) throw ConfigError("epoch budgets must be >= 0");
  if (stage1_last_k < 1) throw ConfigError("stage 1 must train at least one layer");
  if (!(stage1_lr > 0.0)) throw ConfigError("stage 1 lr must be positive");
  if (!(plateau_factor > 0.0) || plateau_factor > 1.0) {
    throw ConfigError("plateau factor must lie in (0, 1]");
  }
  if (plateau_patience < 1) throw ConfigError("plateau patience must be >= 1");
}

StageSchedule StageSchedule::reference_preset() {
  StageSchedule s;
  s.stage1_epochs = 50;
  s.stage2_max_epochs = 200;
  return s;
}

Optimizer::Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
}

void Optimizer::set_lr(double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  lr_ = lr;
}

void Optimizer::step(const std::vector<ParamRef>& params) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  for (const auto& p : params) {
    if (!p.tensor.requires_grad() || p.tensor.grad().empty()) continue;
    Tensor t = p.tensor;
    auto vals = t.mutable_values();
    auto grad = t.grad();
    if (kind_ == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] -= lr_ * grad[i];
    } else {
      State& s = state_[p.name];
      if (s.m.size() != vals.size()) {
        s.m.assign(vals.size(), 0.0);
        s.v.assign(vals.size(), 0.0);
        s.t = 0;
      }
      s.t += 1;
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(s.t));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(s.t));
      for (std::size_t i = 0; i < vals.size(); ++i) {
        s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * grad[i];
        s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
        vals[i] -= lr_ * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + kEps);
      }
    }
    t.zero_grad();
  }
}

double clip_gradients(const std::vector<ParamRef>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.requires_grad() || p.tensor.grad().empty()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& p : params) {
      if (!p.tensor.requires_grad() || p.tensor.grad().empty()) continue;
      Tensor t = p.tensor;
      for (auto& g : t.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

std::string history_csv(const History& history) {
  std::string out = "epoch,split,loss,metric,lr\n";
  char buf[160];
  for (const auto& row : history) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.10g,%.10g,%.10g\n", row.epoch, row.split.c_str(),
                  row.loss, row.metric, row.lr);
    out += buf;
  }
  return out;
}

void write_history_csv(const std::string& path, const History& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history to '" + path + "'");
  out << history_csv(history);
}

void write_sidecar(const std::string& weights_path, int epoch, double lr, double dev_metric,
                   std::uint64_t seed, const std::string& mode) {
  nlohmann::json j = {{"epoch", epoch},
                      {"lr", lr},
                      {"dev_metric", dev_metric},
                      {"seed", seed},
                      {"mode", mode}};
  std::ofstream out(weights_path + ".json");
  if (!out) throw DataError("cannot write sidecar for '" + weights_path + "'");
  out << j.dump(2) << "\n";
}

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<std::vector<double>> snapshot_params(const std::vector<ParamRef>& params) {
  std::vector<std::vector<double>> snap;
  snap.reserve(params.size());
  for (const auto& p : params) {
    snap.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }
  return snap;
}

void restore_params(const std::vector<ParamRef>& params,
                    const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    auto vals = t.mutable_values();
    std::copy(snap[i].begin(), snap[i].end(), vals.begin());
  }
}

// Pixel buffers in [0,1], computed once per run.
struct SampleCache {
  std::vector<const Sample*> samples;
  std::vector<std::vector<double>> inputs;
  int height = 0, width = 0;
};

SampleCache cache_split(const DomainDataset& dataset, SplitTag tag) {
  SampleCache cache;
  cache.samples = dataset.split(tag);
  for (const Sample* s : cache.samples) {
    if (s->image.empty()) throw DataError("sample '" + s->id + "' has no pixels");
    if (cache.height == 0) {
      cache.height = s->image.height;
      cache.width = s->image.width;
    } else if (s->image.height != cache.height || s->image.width != cache.width) {
      throw DataError("sample '" + s->id + "' image size differs from the rest of the split");
    }
    std::vector<double> px(s->image.pixels.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = s->image.pixels[i] / 255.0;
    cache.inputs.push_back(std::move(px));
  }
  return cache;
}

Tensor stack_inputs(const SampleCache& cache, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  const std::size_t per = static_cast<std::size_t>(cache.height) * cache.width * 3;
  std::vector<double> data(per * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& src = cache.inputs[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>(per) * i);
  }
  return Tensor::from_data({n, cache.height, cache.width, 3}, std::move(data));
}

void check_finite(double loss_value, int epoch, int step) {
  if (!std::isfinite(loss_value)) {
    throw DivergenceError("loss diverged at epoch " + std::to_string(epoch) + ", step " +
                          std::to_string(step));
  }
}

std::vector<int> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  rng.shuffle(idx);
  return idx;
}

}  // namespace

TrainOutcome train_recognition(RecognitionModel& model, const DomainDataset& dataset,
                               const TrainConfig& config, const std::string& checkpoint_path) {
  config.validate();
  dataset.validate();
  SampleCache train = cache_split(dataset, SplitTag::kTrain);
  SampleCache dev = cache_split(dataset, SplitTag::kDev);
  if (train.samples.empty() || dev.samples.empty()) {
    throw DataError("recognition training needs non-empty train and dev splits");
  }
  const int k = model.num_classes;
  for (const SampleCache* split : {&train, &dev}) {
    for (const Sample* s : split->samples) {
      if (!s->label) throw DataError("sample '" + s->id + "' lacks a recognition label");
      if (*s->label >= k) {
        throw DataError("sample '" + s->id + "' label exceeds the model's class count");
      }
    }
  }
  std::vector<double> weights = config.loss.class_weights;
  if (weights.empty()) weights = class_weights(dataset);
  if (static_cast<int>(weights.size()) != k) {
    throw ConfigError("class weight count does not match the model");
  }

  auto one_hot = [&](const std::vector<int>& idx) {
    std::vector<double> data(idx.size() * static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int label = *train.samples[static_cast<std::size_t>(idx[i])]->label;
      data[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(label)] = 1.0;
    }
    return Tensor::from_data({static_cast<int>(idx.size()), k}, std::move(data));
  };

  const std::vector<ParamRef> params = model.net.parameters();
  Optimizer opt(config.optimizer, config.lr);
  Rng rng(config.seed);

  TrainOutcome out;
  out.best_dev_metric = -1.0;
  std::vector<std::vector<double>> best_snapshot;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::vector<int> order = shuffled_indices(train.samples.size(), rng);
    double loss_sum = 0.0;
    int step = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      Tensor x = stack_inputs(train, batch);
      Tensor pred = model.forward(x, true, rng);
      Tensor l = weighted_cross_entropy(pred, one_hot(batch), weights);
      ++step;
      check_finite(l.item(), epoch, step);
      loss_sum += l.item() * static_cast<double>(batch.size());
      l.backward();
      if (config.clip_norm) clip_gradients(params, *config.clip_norm);
      opt.step(params);
    }
    const double train_loss = loss_sum / static_cast<double>(train.samples.size());

    std::vector<int> preds, targets;
    double dev_loss_sum = 0.0;
    for (std::size_t i = 0; i < dev.samples.size(); ++i) {
      Tensor x = Tensor::from_data({dev.height, dev.width, 3}, dev.inputs[i]);
      Tensor pred = model.forward(x, false, rng);
      int arg = 0;
      for (int c = 1; c < k; ++c) {
        if (pred.at({c}) > pred.at({arg})) arg = c;
      }
      preds.push_back(arg);
      targets.push_back(*dev.samples[i]->label);
      std::vector<double> hot(static_cast<std::size_t>(k), 0.0);
      hot[static_cast<std::size_t>(targets.back())] = 1.0;
      dev_loss_sum +=
          weighted_cross_entropy(pred, Tensor::from_data({k}, std::move(hot)), weights).item();
    }
    const double dev_loss = dev_loss_sum / static_cast<double>(dev.samples.size());
    check_finite(dev_loss, epoch, 0);
    const double dev_f1 = f1_macro(preds, targets, k);

    out.history.push_back({epoch, "train", train_loss, kNan, opt.lr()});
    out.history.push_back({epoch, "dev", dev_loss, dev_f1, opt.lr()});
    if (dev_f1 > out.best_dev_metric) {
      out.best_dev_metric = dev_f1;
      out.best_epoch = epoch;
      best_snapshot = snapshot_params(params);
    }
  }

  if (out.best_epoch > 0) restore_params(params, best_snapshot);
  if (out.best_epoch == 0) out.best_dev_metric = 0.0;
  if (!checkpoint_path.empty()) {
    save_weights(checkpoint_path, model.net);
    write_sidecar(checkpoint_path, out.best_epoch, config.lr, out.best_dev_metric, config.seed,
                  "recognition");
  }
  return out;
}

namespace {

struct DetectionRun {
  SampleCache train;
  SampleCache dev;
  std::vector<Tensor> train_targets;
  std::vector<Tensor> dev_targets;
  std::vector<double> weights;
};

DetectionRun prepare_detection(const DetectionModel& model, const DomainDataset& dataset,
                               const TrainConfig& config) {
  dataset.validate();
  DetectionRun run;
  run.train = cache_split(dataset, SplitTag::kTrain);
  run.dev = cache_split(dataset, SplitTag::kDev);
  if (run.train.samples.empty() || run.dev.samples.empty()) {
    throw DataError("detection training needs non-empty train and dev splits");
  }
  run.weights = config.loss.class_weights;
  if (run.weights.empty()) run.weights = class_weights(dataset);
  if (static_cast<int>(run.weights.size()) != model.num_classes) {
    throw ConfigError("class weight count does not match the model");
  }
  for (const SampleCache* split : {&run.train, &run.dev}) {
    auto& dst = split == &run.train ? run.train_targets : run.dev_targets;
    for (const Sample* s : split->samples) {
      dst.push_back(
          encode_targets(s->boxes, model.grid_size, model.anchors, model.num_classes).target);
    }
  }
  return run;
}

Tensor stack_targets(const std::vector<Tensor>& targets, const std::vector<int>& idx) {
  const Shape& s = targets[0].shape();
  const std::size_t per = static_cast<std::size_t>(shape_numel(s));
  std::vector<double> data(per * idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = targets[static_cast<std::size_t>(idx[i])].values();
    std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>(per * i));
  }
  return Tensor::from_data({static_cast<int>(idx.size()), s[0], s[1], s[2]}, std::move(data));
}

// One pass over the train split plus a dev-loss evaluation.
struct EpochResult {
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

EpochResult detection_epoch(DetectionModel& model, DetectionRun& run, const TrainConfig& config,
                            Optimizer& opt, Rng& rng, int epoch,
                            const std::vector<ParamRef>& params) {
  EpochResult res;
  std::vector<int> order = shuffled_indices(run.train.samples.size(), rng);
  double loss_sum = 0.0;
  int step = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t stop = std::min(order.size(), start + config.batch_size);
    const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(stop));
    Tensor x = stack_inputs(run.train, batch);
    Tensor y = stack_targets(run.train_targets, batch);
    Tensor pred = model.forward(x, true, rng);
    Tensor l = yolo_loss(pred, y, model.anchors_per_cell(), model.num_classes, run.weights);
    ++step;
    check_finite(l.item(), epoch, step);
    loss_sum += l.item() * static_cast<double>(batch.size());
    l.backward();
    if (config.clip_norm) clip_gradients(params, *config.clip_norm);
    opt.step(params);
  }
  res.train_loss = loss_sum / static_cast<double>(run.train.samples.size());

  double dev_sum = 0.0;
  for (std::size_t i = 0; i < run.dev.samples.size(); ++i) {
    Tensor x = Tensor::from_data({run.dev.height, run.dev.width, 3}, run.dev.inputs[i]);
    Tensor pred = model.forward(x, false, rng);
    dev_sum += yolo_loss(pred, run.dev_targets[i], model.anchors_per_cell(), model.num_classes,
                         run.weights)
                   .item();
  }
  res.dev_loss = dev_sum / static_cast<double>(run.dev.samples.size());
  check_finite(res.dev_loss, epoch, 0);
  return res;
}

TrainOutcome detection_schedule(DetectionModel& model, const DomainDataset& dataset,
                                const StageSchedule& schedule, const TrainConfig& config,
                                const std::string& checkpoint_path, bool with_stage1,
                                const std::string& mode_name) {
  config.validate();
  schedule.validate();
  DetectionRun run = prepare_detection(model, dataset, config);
  const std::vector<ParamRef> params = model.net.parameters();
  Optimizer opt(config.optimizer, schedule.stage1_lr);
  Rng rng(config.seed);

  TrainOutcome out;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_snapshot;
  int epoch = 0;

  auto record = [&](const EpochResult& r, double lr_used) {
    out.history.push_back({epoch, "train", r.train_loss, kNan, lr_used});
    out.history.push_back({epoch, "dev", r.dev_loss, r.dev_loss, lr_used});
    if (r.dev_loss < best_loss) {
      best_loss = r.dev_loss;
      out.best_epoch = epoch;
      out.best_dev_metric = r.dev_loss;
      best_snapshot = snapshot_params(params);
    }
  };

  if (with_stage1) {
    apply_freeze(model, FreezePolicy::all_but_last_k(schedule.stage1_last_k));
    opt.set_lr(schedule.stage1_lr);
    for (int e = 0; e < schedule.stage1_epochs; ++e) {
      ++epoch;
      const double lr_used = opt.lr();
      record(detection_epoch(model, run, config, opt, rng, epoch, params), lr_used);
    }
  }

  apply_freeze(model, FreezePolicy::none());
  opt.set_lr(schedule.stage2_lr());
  double plateau_best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int e = 0; e < schedule.stage2_max_epochs; ++e) {
    ++epoch;
    const double lr_used = opt.lr();
    const EpochResult r = detection_epoch(model, run, config, opt, rng, epoch, params);
    record(r, lr_used);
    if (r.dev_loss < plateau_best) {
      plateau_best = r.dev_loss;
      stale = 0;
    } else if (++stale == schedule.plateau_patience) {
      opt.set_lr(opt.lr() * schedule.plateau_factor);
      stale = 0;
    }
  }

  if (out.best_epoch > 0) restore_params(params, best_snapshot);
  if (!checkpoint_path.empty()) {
    double best_lr = schedule.stage1_lr;
    for (const auto& row : out.history) {
      if (row.epoch == out.best_epoch && row.split == "dev") best_lr = row.lr;
    }
    save_weights(checkpoint_path, model);
    write_sidecar(checkpoint_path, out.best_epoch, best_lr, out.best_dev_metric, config.seed,
                  mode_name);
  }
  return out;
}

}  // namespace

TrainOutcome train_detection(DetectionModel& model, const DomainDataset& dataset,
                             const StageSchedule& schedule, const TrainConfig& config,
                             const std::string& checkpoint_path) {
  return detection_schedule(model, dataset, schedule, config, checkpoint_path, true,
                            "detection");
}

TrainOutcome fine_tune_detection(DetectionModel& model, const DomainDataset& dataset,
                                 const StageSchedule& schedule, const TrainConfig& config,
                                 const std::string& checkpoint_path) {
  return detection_schedule(model, dataset, schedule, config, checkpoint_path, false,
                            "fine_tune");
}

RecognitionEval evaluate_recognition(const RecognitionModel& model, const DomainDataset& dataset,
                                     SplitTag split, const std::vector<double>& class_weights) {
  SampleCache cache = cache_split(dataset, split);
  if (cache.samples.empty()) {
    throw DataError("split '" + split_tag_name(split) + "' has no samples to evaluate");
  }
  const int k = model.num_classes;
  std::vector<double> weights = class_weights;
  if (weights.empty()) weights.assign(static_cast<std::size_t>(k), 1.0);
  if (static_cast<int>(weights.size()) != k) {
    throw ConfigError("class weight count does not match the model");
  }

  Rng rng(0);  // inference runs no dropout; the stream is never consumed
  std::vector<int> preds, targets;
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < cache.samples.size(); ++i) {
    const Sample* s = cache.samples[i];
    if (!s->label) throw DataError("sample '" + s->id + "' lacks a recognition label");
    if (*s->label >= k) {
      throw DataError("sample '" + s->id + "' label exceeds the model's class count");
    }
    Tensor x = Tensor::from_data({cache.height, cache.width, 3}, cache.inputs[i]);
    Tensor pred = model.forward(x, false, rng);
    int arg = 0;
    for (int c = 1; c < k; ++c) {
      if (pred.at({c}) > pred.at({arg})) arg = c;
    }
    preds.push_back(arg);
    targets.push_back(*s->label);
    std::vector<double> hot(static_cast<std::size_t>(k), 0.0);
    hot[static_cast<std::size_t>(*s->label)] = 1.0;
    loss_sum +=
        weighted_cross_entropy(pred, Tensor::from_data({k}, std::move(hot)), weights).item();
  }
  RecognitionEval eval;
  eval.macro_f1 = f1_macro(preds, targets, k);
  eval.mean_loss = loss_sum / static_cast<double>(cache.samples.size());
  return eval;
}

EvalReport evaluate_detection(const DetectionModel& model, const DomainDataset& dataset,
                              SplitTag split, const std::vector<double>& thresholds,
                              double conf_threshold, double nms_iou) {
  std::vector<DetectionRecord> detections;
  std::vector<GroundTruthRecord> ground_truth;
  Rng rng(0);  // inference runs no dropout; the stream is never consumed
  int image_id = 0;
  for (const Sample* s : dataset.split(split)) {
    Tensor raw = model.forward(image_to_tensor(s->image), false, rng);
    for (const Detection& d : nms(decode(raw, model.anchors, model.num_classes, conf_threshold),
                                  nms_iou)) {
      detections.push_back({image_id, d});
    }
    for (const auto& b : s->boxes) ground_truth.push_back({image_id, b.to_box()});
    ++image_id;
  }
  EvalReport report = map_at(detections, ground_truth, model.num_classes, thresholds);
  report.dataset = dataset.domain_id;
  report.partition = split_tag_name(split);
  return report;
}

std::string experiment_mode_name(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::kTargetOnly:
      return "target_only";
    case ExperimentMode::kFineTune:
      return "fine_tune";
    case ExperimentMode::kJoint:
      return "joint";
  }
  throw ConfigError("unknown experiment mode");
}

ExperimentMode experiment_mode_from_name(const std::string& name) {
  if (name == "target_only") return ExperimentMode::kTargetOnly;
  if (name == "fine_tune") return ExperimentMode::kFineTune;
  if (name == "joint") return ExperimentMode::kJoint;
  throw ConfigError("unknown experiment mode '" + name + "'");
}

ExperimentResult run_experiment(DetectionModel& model, const ExperimentConfig& config) {
  if (!config.target) throw ConfigError("experiment needs a target dataset");
  ExperimentResult result;
  switch (config.mode) {
    case ExperimentMode::kTargetOnly:
      result.outcome = train_detection(model, *config.target, config.schedule, config.train,
                                       config.checkpoint_path);
      break;
    case ExperimentMode::kFineTune: {
      if (config.source_checkpoint.empty() ||
          !std::filesystem::exists(config.source_checkpoint)) {
        throw ConfigError("fine-tune needs an existing source checkpoint, got '" +
                          config.source_checkpoint + "'");
      }
      load_weights(config.source_checkpoint, model);
      result.outcome = fine_tune_detection(model, *config.target, config.schedule, config.train,
                                           config.checkpoint_path);
      break;
    }
    case ExperimentMode::kJoint: {
      if (!config.donor) throw ConfigError("joint training needs a donor dataset");
      InjectionSchedule schedule{config.target, config.donor, config.fraction,
                                 config.train.seed};
      const DomainDataset joined = inject(schedule);
      result.outcome =
          train_detection(model, joined, config.schedule, config.train, config.checkpoint_path);
      break;
    }
  }
  result.dev = evaluate_detection(model, *config.target, SplitTag::kDev, config.eval_thresholds);
  result.test =
      evaluate_detection(model, *config.target, SplitTag::kTest, config.eval_thresholds);
  return result;
}

GridSelection hyperparameter_grid(const std::vector<int>& batch_sizes,
                                  const std::vector<double>& lrs, const TrainConfig& base,
                                  const std::function<double(const TrainConfig&)>& score) {
  if (batch_sizes.empty() || lrs.empty()) throw ConfigError("hyperparameter grid is empty");
  GridSelection sel;
  for (int b : batch_sizes) {
    for (double lr : lrs) {
      GridOutcome outcome;
      outcome.config = base;
      outcome.config.batch_size = b;
      outcome.config.lr = lr;
      try {
        outcome.metric = score(outcome.config);
      } catch (const DivergenceError&) {
        outcome.diverged = true;
        outcome.metric = kNan;
      }
      sel.outcomes.push_back(outcome);
    }
  }
  const GridOutcome* best = nullptr;
  for (const auto& o : sel.outcomes) {
    if (o.diverged) continue;
    if (!best || o.metric > best->metric ||
        (o.metric == best->metric && (o.config.lr < best->config.lr ||
                                      (o.config.lr == best->config.lr &&
                                       o.config.batch_size < best->config.batch_size)))) {
      best = &o;
    }
  }
  if (!best) throw DivergenceError("every hyperparameter grid entry diverged");
  sel.best = best->config;
  return sel;
}

}  // namespace gocard
