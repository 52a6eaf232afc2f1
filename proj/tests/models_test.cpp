#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gocard/checkpoint.hpp"
#include "gocard/errors.hpp"
#include "gocard/models.hpp"
#include "gocard/ops.hpp"
#include "gocard/rng.hpp"
#include "gocard/tensor.hpp"

using namespace gocard;

namespace {

Tensor random_image(int size, int channels, Rng& rng) {
  std::vector<double> data(static_cast<std::size_t>(size) * size * channels);
  for (auto& v : data) v = rng.uniform(0.0, 1.0);
  return Tensor::from_data({size, size, channels}, std::move(data));
}

AnchorSet square_anchors(int count) {
  AnchorSet a;
  for (int i = 0; i < count; ++i) {
    const double s = 0.05 * (i + 1);
    a.pairs.emplace_back(s, s);
  }
  return a;
}

std::map<std::string, Shape> param_shapes(const Sequential& net) {
  std::map<std::string, Shape> shapes;
  for (const auto& p : net.parameters()) shapes[p.name] = p.tensor.shape();
  return shapes;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/gocard_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

// One plain SGD sweep over every trainable parameter.
void sgd_step(const Sequential& net, double lr) {
  for (auto& p : net.parameters()) {
    if (!p.tensor.requires_grad() || p.tensor.grad().empty()) continue;
    Tensor t = p.tensor;
    auto vals = t.mutable_values();
    auto grad = t.grad();
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] -= lr * grad[i];
    t.zero_grad();
  }
}

}  // namespace

TEST_CASE("unscaled light head keeps the published dense widths") {
  BuildConfig cfg;
  cfg.input_size = 16;
  cfg.width_factor = 1.0;
  RecognitionModel m = build_recognition(HeadKind::kLight, 5, cfg);

  auto shapes = param_shapes(m.net);
  // Base tops out at 512 channels, head runs 512 then 256 wide.
  CHECK(shapes.at("head.1.dense.weights") == Shape{512, 512});
  CHECK(shapes.at("head.3.dense.weights") == Shape{256, 512});
  CHECK(shapes.at("head.5.classifier.weights") == Shape{5, 256});

  int dropouts = 0;
  for (int i = m.base_layer_count; i < m.net.layer_count(); ++i) {
    if (m.net.layer(i).name().find("dropout") != std::string::npos) ++dropouts;
  }
  CHECK(dropouts == 2);
}

TEST_CASE("desk-scale width factor shrinks the same head to 64/32") {
  BuildConfig cfg;
  cfg.input_size = 16;
  RecognitionModel m = build_recognition(HeadKind::kLight, 5, cfg);
  auto shapes = param_shapes(m.net);
  CHECK(shapes.at("head.1.dense.weights") == Shape{64, 64});
  CHECK(shapes.at("head.3.dense.weights") == Shape{32, 64});
}

TEST_CASE("recognition output is a distribution over all 29 classes") {
  BuildConfig cfg;
  cfg.input_size = 24;
  cfg.seed = 7;
  Rng rng(3);
  for (HeadKind kind : {HeadKind::kLight, HeadKind::kInt, HeadKind::kFull}) {
    CAPTURE(head_kind_name(kind));
    RecognitionModel m = build_recognition(kind, 29, cfg);
    Tensor out = m.forward(random_image(24, 3, rng), false, rng);
    REQUIRE(out.shape() == Shape{29});
    double sum = 0.0;
    for (double v : out.values()) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("recognition forward handles batches") {
  BuildConfig cfg;
  cfg.input_size = 24;
  Rng rng(11);
  RecognitionModel m = build_recognition(HeadKind::kLight, 4, cfg);
  std::vector<double> data(static_cast<std::size_t>(2) * 24 * 24 * 3);
  for (auto& v : data) v = rng.uniform(0.0, 1.0);
  Tensor out = m.forward(Tensor::from_data({2, 24, 24, 3}, std::move(data)), false, rng);
  REQUIRE(out.shape() == Shape{2, 4});
  for (int n = 0; n < 2; ++n) {
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) sum += out.at({n, c});
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("light and int heads freeze the base, full trains everything") {
  BuildConfig cfg;
  cfg.input_size = 24;
  for (HeadKind kind : {HeadKind::kLight, HeadKind::kInt}) {
    RecognitionModel m = build_recognition(kind, 3, cfg);
    for (int i = 0; i < m.net.layer_count(); ++i) {
      for (const auto& p : m.net.layer(i).parameters()) {
        CHECK(p.tensor.requires_grad() == (i >= m.base_layer_count));
      }
    }
  }
  RecognitionModel full = build_recognition(HeadKind::kFull, 3, cfg);
  for (const auto& p : full.net.parameters()) CHECK(p.tensor.requires_grad());
}

TEST_CASE("recognition rejects degenerate configs") {
  BuildConfig cfg;
  cfg.input_size = 24;
  CHECK_THROWS_AS(build_recognition(HeadKind::kLight, 1, cfg), ConfigError);
  cfg.input_size = 20;  // not a multiple of 8
  CHECK_THROWS_AS(build_recognition(HeadKind::kLight, 3, cfg), GeometryError);
}

TEST_CASE("detection output matches the grid law for every backbone") {
  for (BackboneKind backbone : {BackboneKind::kDarknetMini, BackboneKind::kTinydarknetMini,
                                BackboneKind::kSqueezenetMini}) {
    CAPTURE(backbone_kind_name(backbone));
    for (int grid : {4, 8, 13}) {
      for (int num_anchors : {3, 6, 9}) {
        for (int classes : {3, 29}) {
          CAPTURE(grid);
          CAPTURE(num_anchors);
          CAPTURE(classes);
          BuildConfig cfg;
          cfg.input_size = grid * 4;
          cfg.input_channels = 1;
          cfg.seed = 21;
          DetectionModel m =
              build_detection(backbone, grid, square_anchors(num_anchors), classes, cfg);
          Rng rng(5);
          Tensor out = m.forward(random_image(cfg.input_size, 1, rng), false, rng);
          CHECK(out.shape() == Shape{grid, grid, num_anchors * (5 + classes)});
        }
      }
    }
  }
}

TEST_CASE("three anchors and 29 classes give a 102-deep cell vector") {
  BuildConfig cfg;
  cfg.input_size = 32;
  DetectionModel m =
      build_detection(BackboneKind::kDarknetMini, 8, square_anchors(3), 29, cfg);
  Rng rng(2);
  Tensor out = m.forward(random_image(32, 3, rng), false, rng);
  CHECK(out.shape() == Shape{8, 8, 102});
}

TEST_CASE("a 128 input with five downsampling stages lands on a 4x4 grid") {
  BuildConfig cfg;
  cfg.input_size = 128;
  DetectionModel m =
      build_detection(BackboneKind::kTinydarknetMini, 4, square_anchors(6), 5, cfg);
  Rng rng(9);
  Tensor out = m.forward(random_image(128, 3, rng), false, rng);
  CHECK(out.shape() == Shape{4, 4, 60});
}

TEST_CASE("tiny backbone is strictly smaller than the residual one") {
  BuildConfig cfg;
  cfg.input_size = 64;
  AnchorSet anchors = square_anchors(6);
  DetectionModel big = build_detection(BackboneKind::kDarknetMini, 8, anchors, 10, cfg);
  DetectionModel tiny = build_detection(BackboneKind::kTinydarknetMini, 8, anchors, 10, cfg);
  CHECK(parameter_count(tiny.net) < parameter_count(big.net));
  CHECK(parameter_count(tiny.net) > 0);
}

TEST_CASE("detection geometry must divide evenly into power-of-two stages") {
  BuildConfig cfg;
  AnchorSet anchors = square_anchors(3);
  cfg.input_size = 64;
  CHECK_THROWS_AS(build_detection(BackboneKind::kDarknetMini, 13, anchors, 3, cfg),
                  GeometryError);
  cfg.input_size = 60;  // 60/5 = 12, divisible but not a power of two
  CHECK_THROWS_AS(build_detection(BackboneKind::kDarknetMini, 5, anchors, 3, cfg),
                  GeometryError);
  cfg.input_size = 32;
  CHECK_THROWS_AS(build_detection(BackboneKind::kDarknetMini, 32, anchors, 3, cfg),
                  GeometryError);
  CHECK_THROWS_AS(build_detection(BackboneKind::kDarknetMini, 8, AnchorSet{}, 3, cfg),
                  ConfigError);
  CHECK_THROWS_AS(build_detection(BackboneKind::kDarknetMini, 8, anchors, 0, cfg), ConfigError);
}

TEST_CASE("freeze policies select the advertised trainable set") {
  BuildConfig cfg;
  cfg.input_size = 32;
  DetectionModel m = build_detection(BackboneKind::kDarknetMini, 8, square_anchors(3), 4, cfg);

  apply_freeze(m, FreezePolicy::base_frozen());
  for (int i = 0; i < m.net.layer_count(); ++i) {
    for (const auto& p : m.net.layer(i).parameters()) {
      CHECK(p.tensor.requires_grad() == (i >= m.base_layer_count));
    }
  }

  apply_freeze(m, FreezePolicy::all_but_last_k(3));
  const std::vector<int> pls = m.net.parameterized_layers();
  REQUIRE(static_cast<int>(pls.size()) > 3);
  for (int pos = 0; pos < static_cast<int>(pls.size()); ++pos) {
    const bool want = pos >= static_cast<int>(pls.size()) - 3;
    for (const auto& p : m.net.layer(pls[pos]).parameters()) {
      CHECK(p.tensor.requires_grad() == want);
    }
  }

  apply_freeze(m, FreezePolicy::none());
  for (const auto& p : m.net.parameters()) CHECK(p.tensor.requires_grad());

  CHECK_THROWS_AS(apply_freeze(m, FreezePolicy::all_but_last_k(0)), ConfigError);
  CHECK_THROWS_AS(apply_freeze(m, FreezePolicy::all_but_last_k(999)), ConfigError);
}

TEST_CASE("frozen tensors stay bit-identical through training steps") {
  BuildConfig cfg;
  cfg.input_size = 24;
  cfg.seed = 13;
  RecognitionModel m = build_recognition(HeadKind::kLight, 3, cfg);

  std::vector<std::vector<double>> frozen_before;
  for (const auto& p : m.net.parameters()) {
    if (!p.tensor.requires_grad()) {
      frozen_before.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    }
  }
  REQUIRE(!frozen_before.empty());

  Rng rng(17);
  LossConfig loss_cfg;
  loss_cfg.class_weights = {1.0, 1.0, 1.0};
  Tensor target = Tensor::from_data({3}, {0.0, 1.0, 0.0});
  for (int step = 0; step < 5; ++step) {
    Tensor pred = m.forward(random_image(24, 3, rng), true, rng);
    loss(pred, target, loss_cfg).backward();
    sgd_step(m.net, 0.05);
  }

  std::size_t idx = 0;
  for (const auto& p : m.net.parameters()) {
    if (p.tensor.requires_grad()) continue;
    const auto& before = frozen_before[idx++];
    auto now = p.tensor.values();
    REQUIRE(before.size() == now.size());
    bool identical = true;
    for (std::size_t i = 0; i < now.size(); ++i) {
      if (before[i] != now[i]) identical = false;
    }
    CHECK(identical);
  }
  CHECK(idx == frozen_before.size());
}

TEST_CASE("head-only training actually moves the head") {
  BuildConfig cfg;
  cfg.input_size = 24;
  cfg.seed = 4;
  RecognitionModel m = build_recognition(HeadKind::kLight, 3, cfg);
  std::vector<double> head_before;
  for (const auto& p : m.net.parameters()) {
    if (p.name == "head.1.dense.weights") {
      head_before.assign(p.tensor.values().begin(), p.tensor.values().end());
    }
  }
  REQUIRE(!head_before.empty());

  Rng rng(6);
  Tensor target = Tensor::from_data({3}, {1.0, 0.0, 0.0});
  Tensor pred = m.forward(random_image(24, 3, rng), true, rng);
  LossConfig loss_cfg;
  loss_cfg.class_weights = {1.0, 1.0, 1.0};
  loss(pred, target, loss_cfg).backward();
  sgd_step(m.net, 0.1);

  bool moved = false;
  for (const auto& p : m.net.parameters()) {
    if (p.name != "head.1.dense.weights") continue;
    auto now = p.tensor.values();
    for (std::size_t i = 0; i < now.size(); ++i) {
      if (now[i] != head_before[i]) moved = true;
    }
  }
  CHECK(moved);
}

TEST_CASE("kind names round-trip and reject strangers") {
  for (HeadKind k : {HeadKind::kLight, HeadKind::kInt, HeadKind::kFull}) {
    CHECK(head_kind_from_name(head_kind_name(k)) == k);
  }
  for (BackboneKind k : {BackboneKind::kDarknetMini, BackboneKind::kTinydarknetMini,
                         BackboneKind::kSqueezenetMini}) {
    CHECK(backbone_kind_from_name(backbone_kind_name(k)) == k);
  }
  CHECK_THROWS_AS(head_kind_from_name("resnet"), ConfigError);
  CHECK_THROWS_AS(backbone_kind_from_name(""), ConfigError);
}

TEST_CASE("build config survives json") {
  BuildConfig cfg;
  cfg.input_size = 96;
  cfg.input_channels = 1;
  cfg.width_factor = 0.25;
  cfg.seed = 1234567890123ULL;
  BuildConfig back = BuildConfig::from_json(cfg.to_json());
  CHECK(back.input_size == 96);
  CHECK(back.input_channels == 1);
  CHECK(back.width_factor == 0.25);
  CHECK(back.seed == 1234567890123ULL);
}

TEST_CASE("weight files restore every parameter and re-save bit-exactly") {
  BuildConfig cfg;
  cfg.input_size = 24;
  cfg.seed = 100;
  RecognitionModel source = build_recognition(HeadKind::kInt, 7, cfg);

  TempFile file("recog.weights");
  save_weights(file.path, source.net);

  cfg.seed = 200;  // different init, every tensor disagrees before loading
  RecognitionModel cloned = build_recognition(HeadKind::kInt, 7, cfg);
  load_weights(file.path, cloned.net);

  auto src = source.net.parameters();
  auto dst = cloned.net.parameters();
  REQUIRE(src.size() == dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto a = src[i].tensor.values();
    auto b = dst[i].tensor.values();
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      // Storage is f32, so equality holds only to single precision.
      CHECK(b[j] == doctest::Approx(a[j]).epsilon(1e-6));
      CHECK(b[j] == static_cast<double>(static_cast<float>(a[j])));
    }
  }

  TempFile second("recog_resave.weights");
  save_weights(second.path, cloned.net);
  CHECK(slurp(file.path) == slurp(second.path));
}

TEST_CASE("detection weight files carry the anchor table") {
  BuildConfig cfg;
  cfg.input_size = 32;
  cfg.seed = 31;
  AnchorSet anchors;
  anchors.pairs = {{0.11, 0.08}, {0.2, 0.3}, {0.55, 0.4}};
  DetectionModel source = build_detection(BackboneKind::kSqueezenetMini, 8, anchors, 6, cfg);

  TempFile file("detect.weights");
  save_weights(file.path, source);

  DetectionModel target =
      build_detection(BackboneKind::kSqueezenetMini, 8, square_anchors(3), 6, cfg);
  load_weights(file.path, target);
  REQUIRE(target.anchors.size() == 3);
  CHECK(target.anchors.pairs[0].first == doctest::Approx(0.11).epsilon(1e-6));
  CHECK(target.anchors.pairs[2].second == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("weight loading rejects mismatched architectures and mangled files") {
  BuildConfig cfg;
  cfg.input_size = 24;
  RecognitionModel light = build_recognition(HeadKind::kLight, 3, cfg);
  RecognitionModel full = build_recognition(HeadKind::kFull, 3, cfg);

  TempFile file("mismatch.weights");
  save_weights(file.path, light.net);
  CHECK_THROWS_AS(load_weights(file.path, full.net), DataError);

  TempFile garbage("garbage.weights");
  {
    std::ofstream out(garbage.path, std::ios::binary);
    out << "not a weight file";
  }
  CHECK_THROWS_AS(read_weights(garbage.path), ParseError);

  TempFile truncated("truncated.weights");
  {
    const std::string whole = slurp(file.path);
    std::ofstream out(truncated.path, std::ios::binary);
    out.write(whole.data(), static_cast<std::streamsize>(whole.size() / 2));
  }
  CHECK_THROWS_AS(read_weights(truncated.path), ParseError);

  CHECK_THROWS_AS(read_weights("/tmp/gocard_test_does_not_exist.weights"), DataError);
}
