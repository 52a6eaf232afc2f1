#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gocard/anchors.hpp"
#include "gocard/checkpoint.hpp"
#include "gocard/data.hpp"
#include "gocard/errors.hpp"
#include "gocard/metrics.hpp"
#include "gocard/models.hpp"
#include "gocard/train.hpp"
#include "gocard/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gocard;

namespace {

// --index and --gt accept either the dataset directory or its index.txt.
std::string dataset_dir(const std::string& path) {
  fs::path p(path);
  if (fs::is_regular_file(p)) return p.parent_path().string();
  return path;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ConfigError("cannot read config file '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + std::string(e.what()));
  }
}

// A manifest embeds the resolved config it ran with, so pointing --config at
// a manifest reruns the original experiment.
json resolve_config(const json& j) {
  if (j.is_object() && j.contains("command") && j.contains("config")) return j.at("config");
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_path, const json& snapshot, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  json m = {{"command", command},   {"config_path", config_path}, {"config", snapshot},
            {"seed", seed},         {"out_dir", out_dir},         {"version", kToolkitVersion}};
  write_json_file(fs::path(out_dir) / "manifest.json", m);
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<int>();
  if (j.contains("optimizer")) {
    t.optimizer = optimizer_kind_from_name(j.at("optimizer").get<std::string>());
  }
  if (j.contains("lr")) t.lr = j.at("lr").get<double>();
  if (j.contains("max_epochs")) t.max_epochs = j.at("max_epochs").get<int>();
  if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("clip_norm") && !j.at("clip_norm").is_null()) {
    t.clip_norm = j.at("clip_norm").get<double>();
  }
  if (j.contains("class_weights")) {
    t.loss.class_weights = j.at("class_weights").get<std::vector<double>>();
  }
  return t;
}

StageSchedule schedule_from_json(const json& j) {
  StageSchedule s;
  if (j.contains("stage1_epochs")) s.stage1_epochs = j.at("stage1_epochs").get<int>();
  if (j.contains("stage1_last_k")) s.stage1_last_k = j.at("stage1_last_k").get<int>();
  if (j.contains("stage1_lr")) s.stage1_lr = j.at("stage1_lr").get<double>();
  if (j.contains("stage2_max_epochs")) {
    s.stage2_max_epochs = j.at("stage2_max_epochs").get<int>();
  }
  if (j.contains("plateau_factor")) s.plateau_factor = j.at("plateau_factor").get<double>();
  if (j.contains("plateau_patience")) s.plateau_patience = j.at("plateau_patience").get<int>();
  return s;
}

BuildConfig build_from_json(const json& j) {
  BuildConfig c;
  if (j.contains("input_size")) c.input_size = j.at("input_size").get<int>();
  if (j.contains("input_channels")) c.input_channels = j.at("input_channels").get<int>();
  if (j.contains("width_factor")) c.width_factor = j.at("width_factor").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void check_image_size(const DomainDataset& data, int input_size) {
  for (const auto& s : data.samples) {
    if (s.image.empty()) continue;
    if (s.image.height != input_size || s.image.width != input_size) {
      throw ConfigError("config input_size " + std::to_string(input_size) +
                        " does not match dataset images (" + std::to_string(s.image.height) +
                        "x" + std::to_string(s.image.width) + ")");
    }
    return;
  }
}

// Explicit [[w, h], ...] pairs, or {"k": K, "seed": S} to fit them to the
// train-split boxes.
AnchorSet anchors_from_config(const json& cfg, const DomainDataset& data) {
  if (!cfg.contains("anchors")) throw ConfigError("detection config needs 'anchors'");
  const json& a = cfg.at("anchors");
  if (a.is_array()) {
    AnchorSet set;
    for (const auto& pair : a) {
      set.pairs.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    }
    set.validate();
    return set;
  }
  std::vector<std::pair<double, double>> boxes;
  for (const Sample* s : data.split(SplitTag::kTrain)) {
    for (const auto& b : s->boxes) boxes.emplace_back(b.w, b.h);
  }
  return kmeans_anchors(boxes, a.at("k").get<int>(),
                        a.contains("seed") ? a.at("seed").get<std::uint64_t>() : 0);
}

std::vector<double> thresholds_from_config(const json& cfg) {
  if (!cfg.contains("eval_thresholds")) return {0.2, 0.4, 0.5};
  return cfg.at("eval_thresholds").get<std::vector<double>>();
}

json anchors_to_json(const AnchorSet& set) {
  json out = json::array();
  for (const auto& [w, h] : set.pairs) out.push_back({w, h});
  return out;
}

SplitRatios parse_ratios(const std::string& text) {
  SplitRatios r;
  int* slots[3] = {&r.train, &r.dev, &r.test};
  std::stringstream ss(text);
  std::string tok;
  int i = 0;
  while (std::getline(ss, tok, ',')) {
    if (i >= 3) throw ConfigError("--ratios wants three comma-separated integers");
    try {
      *slots[i++] = std::stoi(tok);
    } catch (const std::exception&) {
      throw ConfigError("--ratios wants three comma-separated integers, got '" + text + "'");
    }
  }
  if (i != 3) throw ConfigError("--ratios wants three comma-separated integers, got '" + text +
                                "'");
  return r;
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("--iou wants comma-separated reals, got '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("--iou wants at least one threshold");
  return out;
}

int run_synth(const std::string& domain, int n, int classes, int size, std::uint64_t seed,
              const SynthOptions& options, const std::string& out) {
  const SynthDomain d = domain == "occluded" ? SynthDomain::kOccluded : SynthDomain::kClean;
  DomainDataset ds = synth_generate(d, n, classes, size, seed, options);
  save_dataset(ds, out, TaskKind::kDetection);
  std::cout << "wrote " << ds.samples.size() << " samples to " << out << "\n";
  return 0;
}

int run_anchors(const std::string& index, int k, std::uint64_t seed) {
  DomainDataset ds = load_dataset(dataset_dir(index));
  std::vector<std::pair<double, double>> boxes;
  for (const auto& s : ds.samples) {
    for (const auto& b : s.boxes) boxes.emplace_back(b.w, b.h);
  }
  AnchorSet set = kmeans_anchors(boxes, k, seed);
  std::cout << json{{"anchors", anchors_to_json(set)}}.dump(2) << "\n";
  return 0;
}

int run_split(const std::string& index, const std::string& ratios, std::uint64_t seed) {
  const std::string dir = dataset_dir(index);
  DomainDataset ds = load_dataset(dir);
  std::vector<std::string> warnings;
  DomainDataset out = stratified_split(ds, parse_ratios(ratios), seed, &warnings);
  bool detection = false;
  for (const auto& s : out.samples) detection = detection || !s.boxes.empty();
  save_dataset(out, dir, detection ? TaskKind::kDetection : TaskKind::kRecognition);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "train=" << out.split_size(SplitTag::kTrain)
            << " dev=" << out.split_size(SplitTag::kDev)
            << " test=" << out.split_size(SplitTag::kTest) << "\n";
  return 0;
}

int run_train_recognition(const json& cfg, const std::string& out_dir) {
  DomainDataset data = load_dataset(cfg.at("data_dir").get<std::string>());
  bool unlabeled = false;
  for (const auto& s : data.samples) unlabeled = unlabeled || !s.label;
  if (unlabeled) data = to_recognition(data);

  const BuildConfig mc = build_from_json(cfg.value("model", json::object()));
  check_image_size(data, mc.input_size);
  RecognitionModel model = build_recognition(
      head_kind_from_name(cfg.at("head").get<std::string>()), data.num_classes(), mc);
  const TrainConfig tc = train_from_json(cfg.value("train", json::object()));

  const std::string ckpt = (fs::path(out_dir) / "model.gcrd").string();
  const TrainOutcome out = train_recognition(model, data, tc, ckpt);
  write_history_csv((fs::path(out_dir) / "history.csv").string(), out.history);

  const RecognitionEval test = evaluate_recognition(model, data, SplitTag::kTest);
  json report = {{"task", "recognition"},
                 {"dataset", data.domain_id},
                 {"num_classes", data.num_classes()},
                 {"best_epoch", out.best_epoch},
                 {"dev_macro_f1", out.best_dev_metric},
                 {"test_macro_f1", test.macro_f1},
                 {"checkpoint", ckpt}};
  write_json_file(fs::path(out_dir) / "report.json", report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

int run_train_detection(const json& cfg, const std::string& out_dir) {
  DomainDataset data = load_dataset(cfg.at("data_dir").get<std::string>());
  const BuildConfig mc = build_from_json(cfg.value("model", json::object()));
  check_image_size(data, mc.input_size);
  const BackboneKind backbone = backbone_kind_from_name(cfg.at("backbone").get<std::string>());
  DetectionModel model = build_detection(backbone, cfg.at("grid_size").get<int>(),
                                         anchors_from_config(cfg, data), data.num_classes(), mc);
  TrainConfig tc = train_from_json(cfg.value("train", json::object()));
  // The published squeezenet recipe clips gradients at 0.5; an explicit
  // clip_norm in the config overrides it.
  if (!tc.clip_norm && backbone == BackboneKind::kSqueezenetMini) tc.clip_norm = 0.5;
  const StageSchedule schedule = schedule_from_json(cfg.value("schedule", json::object()));

  const std::string ckpt = (fs::path(out_dir) / "model.gcrd").string();
  const TrainOutcome out = train_detection(model, data, schedule, tc, ckpt);
  write_history_csv((fs::path(out_dir) / "history.csv").string(), out.history);

  const std::vector<double> thresholds = thresholds_from_config(cfg);
  const EvalReport dev = evaluate_detection(model, data, SplitTag::kDev, thresholds);
  const EvalReport test = evaluate_detection(model, data, SplitTag::kTest, thresholds);
  write_json_file(fs::path(out_dir) / "dev_report.json", dev.to_json());
  write_json_file(fs::path(out_dir) / "test_report.json", test.to_json());

  json summary = {{"task", "detection"},
                  {"dataset", data.domain_id},
                  {"anchors", anchors_to_json(model.anchors)},
                  {"best_epoch", out.best_epoch},
                  {"best_dev_loss", out.best_dev_metric},
                  {"dev_map", dev.to_json().at("thresholds")},
                  {"test_map", test.to_json().at("thresholds")},
                  {"checkpoint", ckpt}};
  write_json_file(fs::path(out_dir) / "report.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_train(const std::string& task_flag, const std::string& config_path) {
  const json cfg = resolve_config(read_json_file(config_path));
  const std::string task = !task_flag.empty() ? task_flag : cfg.value("task", "");
  if (task != "recognition" && task != "detection") {
    throw ConfigError("task must be 'recognition' or 'detection' (via --task or config)");
  }
  const std::string out_dir = cfg.at("out_dir").get<std::string>();
  json snapshot = cfg;
  snapshot["task"] = task;
  write_manifest(out_dir, "train", config_path, snapshot,
                 train_from_json(cfg.value("train", json::object())).seed);
  return task == "recognition" ? run_train_recognition(cfg, out_dir)
                               : run_train_detection(cfg, out_dir);
}

int run_experiment_cmd(const std::string& mode_flag, std::optional<double> fraction_flag,
                       const std::string& config_path) {
  const json cfg = resolve_config(read_json_file(config_path));
  std::string mode_name = !mode_flag.empty() ? mode_flag : cfg.value("mode", "");
  if (mode_name == "ft") mode_name = "fine_tune";
  if (mode_name == "jl") mode_name = "joint";
  const ExperimentMode mode = experiment_mode_from_name(mode_name);
  const double fraction = fraction_flag ? *fraction_flag : cfg.value("fraction", 0.0);
  if (fraction < 0.0 || fraction > 100.0) {
    throw ConfigError("--fraction must lie in [0, 100], got " + std::to_string(fraction));
  }

  DomainDataset target = load_dataset(cfg.at("target_dir").get<std::string>());
  std::optional<DomainDataset> donor;
  if (mode == ExperimentMode::kJoint) {
    if (!cfg.contains("donor_dir")) throw ConfigError("joint mode needs 'donor_dir'");
    donor = load_dataset(cfg.at("donor_dir").get<std::string>());
  }

  const BuildConfig mc = build_from_json(cfg.value("model", json::object()));
  check_image_size(target, mc.input_size);
  const BackboneKind backbone = backbone_kind_from_name(cfg.at("backbone").get<std::string>());
  DetectionModel model =
      build_detection(backbone, cfg.at("grid_size").get<int>(), anchors_from_config(cfg, target),
                      target.num_classes(), mc);

  ExperimentConfig ec;
  ec.mode = mode;
  ec.target = &target;
  ec.donor = donor ? &*donor : nullptr;
  ec.fraction = fraction;
  ec.source_checkpoint = cfg.value("source_checkpoint", "");
  ec.train = train_from_json(cfg.value("train", json::object()));
  if (!ec.train.clip_norm && backbone == BackboneKind::kSqueezenetMini) ec.train.clip_norm = 0.5;
  ec.schedule = schedule_from_json(cfg.value("schedule", json::object()));
  ec.eval_thresholds = thresholds_from_config(cfg);
  const std::string out_dir = cfg.at("out_dir").get<std::string>();
  ec.checkpoint_path = (fs::path(out_dir) / "model.gcrd").string();

  json snapshot = cfg;
  snapshot["mode"] = mode_name;
  snapshot["fraction"] = fraction;
  write_manifest(out_dir, "experiment", config_path, snapshot, ec.train.seed);

  const ExperimentResult res = run_experiment(model, ec);
  write_history_csv((fs::path(out_dir) / "history.csv").string(), res.outcome.history);
  write_json_file(fs::path(out_dir) / "dev_report.json", res.dev.to_json());
  write_json_file(fs::path(out_dir) / "test_report.json", res.test.to_json());

  json summary = {{"mode", mode_name},
                  {"fraction", fraction},
                  {"target", target.domain_id},
                  {"best_epoch", res.outcome.best_epoch},
                  {"dev_map", res.dev.to_json().at("thresholds")},
                  {"test_map", res.test.to_json().at("thresholds")},
                  {"checkpoint", ec.checkpoint_path}};
  write_json_file(fs::path(out_dir) / "report.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_eval(const std::string& pred_path, const std::string& gt_index,
             const std::string& iou_text, const std::string& out_dir) {
  const DomainDataset gt = load_dataset(dataset_dir(gt_index));
  const int num_classes = gt.num_classes();
  std::map<std::string, int> id_to_image;
  std::vector<GroundTruthRecord> ground_truth;
  for (std::size_t i = 0; i < gt.samples.size(); ++i) {
    id_to_image[gt.samples[i].id] = static_cast<int>(i);
    for (const auto& b : gt.samples[i].boxes) {
      ground_truth.push_back({static_cast<int>(i), b.to_box()});
    }
  }

  std::ifstream in(pred_path);
  if (!in.good()) throw DataError("cannot read predictions file '" + pred_path + "'");
  std::vector<DetectionRecord> detections;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id;
    int class_id = 0;
    double conf = 0.0, cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
    std::string context = pred_path + ":" + std::to_string(line_no);
    if (!(ss >> id >> class_id >> conf >> cx >> cy >> w >> h)) {
      throw ParseError(context + ": expected 'sample_id class_id confidence cx cy w h'");
    }
    std::string extra;
    if (ss >> extra) {
      throw ParseError(context + ": expected 'sample_id class_id confidence cx cy w h'");
    }
    auto it = id_to_image.find(id);
    if (it == id_to_image.end()) {
      throw DataError(context + ": unknown sample id '" + id + "'");
    }
    if (class_id < 0 || class_id >= num_classes) {
      throw DataError(context + ": class " + std::to_string(class_id) + " out of range");
    }
    if (!(w > 0.0) || !(h > 0.0)) throw ParseError(context + ": degenerate box");
    detections.push_back(
        {it->second, {BoundingBox::from_center(cx, cy, w, h, class_id), class_id, conf}});
  }

  const std::vector<double> thresholds = parse_thresholds(iou_text);
  EvalReport report = map_at(detections, ground_truth, num_classes, thresholds);
  report.dataset = gt.domain_id;
  report.partition = "all";

  std::vector<PRCurve> curves;
  std::vector<long long> gt_count(static_cast<std::size_t>(num_classes), 0);
  for (const auto& g : ground_truth) gt_count[static_cast<std::size_t>(g.box.class_id)] += 1;
  for (double thr : thresholds) {
    const MatchResult match = match_detections(detections, ground_truth, thr, num_classes);
    std::vector<std::vector<char>> ranked(static_cast<std::size_t>(num_classes));
    for (std::size_t pos : match.order) {
      ranked[static_cast<std::size_t>(detections[pos].det.class_id)].push_back(
          match.is_tp[pos]);
    }
    for (int c = 0; c < num_classes; ++c) {
      if (gt_count[static_cast<std::size_t>(c)] == 0) continue;
      curves.push_back(pr_curve(ranked[static_cast<std::size_t>(c)],
                                gt_count[static_cast<std::size_t>(c)], c, thr));
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_json_file(fs::path(out_dir) / "report.json", report.to_json());
  write_text_file(fs::path(out_dir) / "pr_curves.csv", pr_curve_csv(curves));
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    // Config, geometry, dimension, contract, and state failures all trace
    // back to a bad configuration.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("GOCARD_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) Eigen::setNbThreads(n);
  }

  CLI::App app{"car-part recognition and detection toolkit"};
  app.set_version_flag("--version", std::string(kToolkitVersion));
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene dataset");
  std::string synth_domain = "clean";
  int synth_n = 0, synth_classes = 8, synth_size = 64;
  SynthOptions synth_options;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--domain", synth_domain, "clean or occluded")
      ->check(CLI::IsMember({"clean", "occluded"}));
  synth->add_option("--n", synth_n, "number of samples")->required();
  synth->add_option("--classes", synth_classes, "part classes to draw (1-8)");
  synth->add_option("--size", synth_size, "square image size in pixels");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--min-parts", synth_options.min_parts, "fewest parts per scene");
  synth->add_option("--max-parts", synth_options.max_parts, "most parts per scene");
  synth->add_option("--out", synth_out, "output dataset directory")->required();

  auto* anchors = app.add_subcommand("anchors", "fit anchor boxes to a dataset");
  std::string anchors_index;
  int anchors_k = 6;
  std::uint64_t anchors_seed = 0;
  anchors->add_option("--index", anchors_index, "dataset directory or its index.txt")
      ->required();
  anchors->add_option("--k", anchors_k, "number of anchors");
  anchors->add_option("--seed", anchors_seed, "clustering seed");

  auto* split = app.add_subcommand("split", "stratify a dataset into train/dev/test");
  std::string split_index, split_ratios = "80,10,10";
  std::uint64_t split_seed = 0;
  split->add_option("--index", split_index, "dataset directory or its index.txt")->required();
  split->add_option("--ratios", split_ratios, "train,dev,test percentages");
  split->add_option("--seed", split_seed, "assignment seed");

  auto* train = app.add_subcommand("train", "train a model from a JSON config");
  std::string train_task, train_config;
  train->add_option("--task", train_task, "recognition or detection")
      ->check(CLI::IsMember({"recognition", "detection"}));
  train->add_option("--config", train_config, "JSON config or a previous manifest")->required();

  auto* experiment = app.add_subcommand("experiment", "run a domain-transfer experiment");
  std::string exp_mode, exp_config;
  double exp_fraction = 0.0;
  experiment->add_option("--mode", exp_mode, "target_only, ft (fine_tune), or jl (joint)")
      ->check(CLI::IsMember({"target_only", "ft", "fine_tune", "jl", "joint"}));
  auto* frac_opt = experiment->add_option("--fraction", exp_fraction,
                                          "percent of donor train samples to inject");
  experiment->add_option("--config", exp_config, "JSON config or a previous manifest")
      ->required();

  auto* eval = app.add_subcommand("eval", "score a prediction file against ground truth");
  std::string eval_pred, eval_gt, eval_iou = "0.2,0.4,0.5", eval_out = ".";
  eval->add_option("--pred", eval_pred, "detections, one 'id class conf cx cy w h' per line")
      ->required();
  eval->add_option("--gt", eval_gt, "dataset directory or its index.txt")->required();
  eval->add_option("--iou", eval_iou, "comma-separated IoU thresholds");
  eval->add_option("--out", eval_out, "directory for report.json and pr_curves.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (synth->parsed()) {
    return guarded([&] {
      return run_synth(synth_domain, synth_n, synth_classes, synth_size, synth_seed,
                       synth_options, synth_out);
    });
  }
  if (anchors->parsed()) {
    return guarded([&] { return run_anchors(anchors_index, anchors_k, anchors_seed); });
  }
  if (split->parsed()) {
    return guarded([&] { return run_split(split_index, split_ratios, split_seed); });
  }
  if (train->parsed()) {
    return guarded([&] { return run_train(train_task, train_config); });
  }
  if (experiment->parsed()) {
    return guarded([&] {
      std::optional<double> fraction;
      if (frac_opt->count() > 0) fraction = exp_fraction;
      return run_experiment_cmd(exp_mode, fraction, exp_config);
    });
  }
  return guarded([&] { return run_eval(eval_pred, eval_gt, eval_iou, eval_out); });
}
