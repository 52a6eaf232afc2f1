#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>

#include "gocard/anchors.hpp"
#include "gocard/layers.hpp"

namespace gocard {

enum class HeadKind { kLight, kInt, kFull };
enum class BackboneKind { kDarknetMini, kTinydarknetMini, kSqueezenetMini };

std::string head_kind_name(HeadKind kind);
HeadKind head_kind_from_name(const std::string& name);
std::string backbone_kind_name(BackboneKind kind);
BackboneKind backbone_kind_from_name(const std::string& name);

// Shared sizing knobs. width_factor scales every reference channel width; the
// desk-scale default of 1/8 turns the 512/256 head into 64/32.
struct BuildConfig {
  int input_size = 64;
  int input_channels = 3;
  double width_factor = 0.125;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static BuildConfig from_json(const nlohmann::json& j);
};

struct RecognitionModel {
  Sequential net;
  int base_layer_count = 0;  // net layers [0, base_layer_count) form the base
  HeadKind head_kind = HeadKind::kLight;
  int num_classes = 0;
  BuildConfig config;

  // Produces a probability vector (num_classes) or batch (N, num_classes).
  Tensor forward(const Tensor& image, bool training, Rng& rng) const {
    return net.forward(image, training, rng);
  }
};

struct DetectionModel {
  Sequential net;
  int base_layer_count = 0;
  BackboneKind backbone_kind = BackboneKind::kDarknetMini;
  int grid_size = 0;
  int num_classes = 0;
  AnchorSet anchors;
  BuildConfig config;

  int anchors_per_cell() const { return anchors.size(); }
  // Produces raw grid logits (S, S, A*(5+C)) or a batch thereof.
  Tensor forward(const Tensor& image, bool training, Rng& rng) const {
    return net.forward(image, training, rng);
  }
};

// LIGHT: frozen base, global max pooling, two relu dense layers with 50%
// dropout. INT: frozen base plus a wide valid 3x3 conv, then sigmoid/relu
// dense layers. FULL: trainable base, 3x3 conv, two sigmoid dense layers.
// Every head ends in a softmax classifier over num_classes.
RecognitionModel build_recognition(HeadKind head_kind, int num_classes, const BuildConfig& config);

// Backbone downsamples input_size to grid_size through power-of-two stages;
// the head emits (S, S, A*(5+C)) raw values with no output activation.
DetectionModel build_detection(BackboneKind backbone_kind, int grid_size, const AnchorSet& anchors,
                               int num_classes, const BuildConfig& config);

struct FreezePolicy {
  enum class Mode { kNone, kBaseFrozen, kAllButLastK };
  Mode mode = Mode::kNone;
  int k = 0;

  static FreezePolicy none() { return {Mode::kNone, 0}; }
  static FreezePolicy base_frozen() { return {Mode::kBaseFrozen, 0}; }
  static FreezePolicy all_but_last_k(int k) { return {Mode::kAllButLastK, k}; }
};

// Marks exactly the policy's tensors trainable: none -> everything,
// base_frozen -> head only, all_but_last_k -> the last k parameterized layers.
void apply_freeze(Sequential& net, int base_layer_count, const FreezePolicy& policy);
void apply_freeze(RecognitionModel& model, const FreezePolicy& policy);
void apply_freeze(DetectionModel& model, const FreezePolicy& policy);

long long parameter_count(const Sequential& net);

}  // namespace gocard
