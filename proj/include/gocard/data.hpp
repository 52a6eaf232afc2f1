#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gocard/boxes.hpp"
#include "gocard/image.hpp"
#include "gocard/rng.hpp"

namespace gocard {

enum class SplitTag { kTrain, kDev, kTest };

std::string split_tag_name(SplitTag tag);
SplitTag split_tag_from_name(const std::string& name);

// One labeled image. Detection samples carry boxes; recognition samples carry
// a single class label. Both may be present (a detection sample whose label
// view is wanted), neither means the sample is unlabeled and invalid.
struct Sample {
  std::string id;
  Image image;
  std::vector<GroundTruthBox> boxes;
  std::optional<int> label;
  SplitTag split = SplitTag::kTrain;
  std::string domain;

  // Distinct classes this sample exhibits, ascending.
  std::vector<int> classes() const;
  bool operator==(const Sample&) const = default;
};

struct DomainDataset {
  std::string domain_id;
  std::vector<std::string> class_names;
  std::vector<Sample> samples;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<const Sample*> split(SplitTag tag) const;
  int split_size(SplitTag tag) const;
  // Checks class id ranges, box geometry, id uniqueness; throws DataError.
  void validate() const;
  bool operator==(const DomainDataset&) const = default;
};

struct SplitRatios {
  int train = 80;
  int dev = 10;
  int test = 10;
};

// Reassigns split tags class-stratified: single-label data lands within one
// sample of each exact per-class quota; multi-label data is distributed
// rarest-label-first. Classes with under 3 samples are reported in *warnings.
DomainDataset stratified_split(const DomainDataset& dataset, const SplitRatios& ratios,
                               std::uint64_t seed, std::vector<std::string>* warnings = nullptr);

// Add-one smoothed inverse-frequency weights from the train split:
// w_c = N / (K * (n_c + 1)) with N = total labels + K.
std::vector<double> class_weights(const DomainDataset& dataset);

struct InjectionSchedule {
  const DomainDataset* target = nullptr;  // supplies dev/test and its full train
  const DomainDataset* donor = nullptr;   // train split sampled into the result
  double fraction = 0.0;                  // percent of donor train, 0..100
  std::uint64_t seed = 0;
};

// Train split becomes target.train plus a seeded uniform sample (without
// replacement) of fraction% of donor.train; dev/test stay purely target's.
DomainDataset inject(const InjectionSchedule& schedule);

enum class SynthDomain { kClean, kOccluded };

struct SynthOptions {
  int min_parts = 1;
  int max_parts = 6;
};

// Deterministic synthetic car-part scenes: each image composes drawn part
// shapes with exact box annotations. The occluded domain adds opaque limb
// strokes over 10-50% of some boxes and harsher lighting; annotations always
// describe the un-occluded extent.
DomainDataset synth_generate(SynthDomain domain, int n, int num_classes, int image_size,
                             std::uint64_t seed, const SynthOptions& options = {});

// The drawable part vocabulary, index = class id.
const std::vector<std::string>& synth_class_names();

enum class TaskKind { kRecognition, kDetection };

// Collapses box annotations into single-class labels; every sample must show
// exactly one distinct class.
DomainDataset to_recognition(const DomainDataset& dataset);

// Directory layout: index.txt, classes.txt, images/<id>.png,
// annotations/<id>.txt. Detection annotation lines are
// "class_id cx cy w h" (normalized); recognition files hold one "class_id".
void save_dataset(const DomainDataset& dataset, const std::string& dir, TaskKind task);
DomainDataset load_dataset(const std::string& dir);

}  // namespace gocard
