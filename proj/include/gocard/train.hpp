#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gocard/data.hpp"
#include "gocard/layers.hpp"
#include "gocard/metrics.hpp"
#include "gocard/models.hpp"
#include "gocard/ops.hpp"

namespace gocard {

enum class OptimizerKind { kAdam, kSgd };

std::string optimizer_kind_name(OptimizerKind kind);
OptimizerKind optimizer_kind_from_name(const std::string& name);

struct TrainConfig {
  int batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 0.001;
  int max_epochs = 30;
  std::uint64_t seed = 0;
  std::optional<double> clip_norm;
  LossConfig loss;  // class_weights left empty -> derived from the train split

  void validate() const;
};

// Two-step detection schedule: a short frozen warm-up on the last layers at
// lr1, then full training at exactly lr1/10 with plateau decay.
struct StageSchedule {
  int stage1_epochs = 10;
  int stage1_last_k = 3;
  double stage1_lr = 0.005;
  int stage2_max_epochs = 40;
  double plateau_factor = 0.1;
  int plateau_patience = 5;

  double stage2_lr() const { return stage1_lr / 10.0; }
  void validate() const;
  // The published budgets: 50 warm-up epochs, up to 200 full epochs.
  static StageSchedule reference_preset();
};

// Gradient-based state per parameter name; freshly unfrozen parameters start
// with clean state on their first step.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr);

  double lr() const { return lr_; }
  void set_lr(double lr);
  // Updates every trainable parameter carrying a gradient, then clears those
  // gradients.
  void step(const std::vector<ParamRef>& params);

 private:
  struct State {
    std::vector<double> m;
    std::vector<double> v;
    long long t = 0;
  };
  OptimizerKind kind_;
  double lr_;
  std::map<std::string, State> state_;
};

// Scales all trainable gradients so their global L2 norm is at most
// max_norm; returns the pre-clip norm.
double clip_gradients(const std::vector<ParamRef>& params, double max_norm);

struct HistoryRow {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double metric = 0.0;  // dev macro-F1 (recognition) or dev loss (detection)
  double lr = 0.0;
};

using History = std::vector<HistoryRow>;

std::string history_csv(const History& history);
void write_history_csv(const std::string& path, const History& history);

struct TrainOutcome {
  History history;
  int best_epoch = 0;        // 1-based; 0 when no epoch ran
  double best_dev_metric = 0.0;
};

// Weight file sidecar describing how the checkpoint was reached.
void write_sidecar(const std::string& weights_path, int epoch, double lr, double dev_metric,
                   std::uint64_t seed, const std::string& mode);

// Epoch loop over the train split with dev macro-F1 tracked per epoch; the
// model keeps the weights of its best dev epoch. A non-empty checkpoint_path
// persists that best state plus a sidecar.
TrainOutcome train_recognition(RecognitionModel& model, const DomainDataset& dataset,
                               const TrainConfig& config, const std::string& checkpoint_path = "");

// Stage 1 trains only the last stage1_last_k parameterized layers, stage 2
// unfreezes everything at a tenth of the lr with plateau decay. Model keeps
// the weights of its lowest dev-loss epoch.
TrainOutcome train_detection(DetectionModel& model, const DomainDataset& dataset,
                             const StageSchedule& schedule, const TrainConfig& config,
                             const std::string& checkpoint_path = "");

// Stage-2-style full fine-tune (no warm-up stage); the entry point for
// adapting a source-trained checkpoint to a new domain.
TrainOutcome fine_tune_detection(DetectionModel& model, const DomainDataset& dataset,
                                 const StageSchedule& schedule, const TrainConfig& config,
                                 const std::string& checkpoint_path = "");

// Decodes, suppresses, and scores one split of a dataset.
EvalReport evaluate_detection(const DetectionModel& model, const DomainDataset& dataset,
                              SplitTag split, const std::vector<double>& thresholds = {0.2, 0.4,
                                                                                       0.5},
                              double conf_threshold = 0.05, double nms_iou = 0.45);

struct RecognitionEval {
  double macro_f1 = 0.0;
  double mean_loss = 0.0;
};

// Argmax classification over one split; loss uses the given class weights
// (uniform when empty).
RecognitionEval evaluate_recognition(const RecognitionModel& model, const DomainDataset& dataset,
                                     SplitTag split,
                                     const std::vector<double>& class_weights = {});

enum class ExperimentMode { kTargetOnly, kFineTune, kJoint };

std::string experiment_mode_name(ExperimentMode mode);
ExperimentMode experiment_mode_from_name(const std::string& name);

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::kTargetOnly;
  const DomainDataset* target = nullptr;  // evaluation domain, always trained on
  const DomainDataset* donor = nullptr;   // joint mode: injected into training
  double fraction = 0.0;                  // joint mode: percent of donor train
  std::string source_checkpoint;          // fine-tune mode: pre-trained weights
  TrainConfig train;
  StageSchedule schedule;
  std::vector<double> eval_thresholds = {0.2, 0.4, 0.5};
  std::string checkpoint_path;
};

struct ExperimentResult {
  EvalReport dev;
  EvalReport test;
  TrainOutcome outcome;
};

// target_only: train on target alone. fine_tune: load the source checkpoint,
// then full fine-tune on target. joint: train once on target plus an injected
// fraction of donor train. Always evaluated on the target dev and test.
ExperimentResult run_experiment(DetectionModel& model, const ExperimentConfig& config);

struct GridOutcome {
  TrainConfig config;
  double metric = 0.0;
  bool diverged = false;
};

struct GridSelection {
  TrainConfig best;
  std::vector<GridOutcome> outcomes;
};

// Exhaustive (batch_size, lr) search maximizing the scorer's dev metric.
// Diverging entries are recorded and skipped; ties prefer the smaller lr,
// then the smaller batch.
GridSelection hyperparameter_grid(const std::vector<int>& batch_sizes,
                                  const std::vector<double>& lrs, const TrainConfig& base,
                                  const std::function<double(const TrainConfig&)>& score);

}  // namespace gocard
