#include "gocard/models.hpp"

#include <cmath>

#include "gocard/errors.hpp"
#include "gocard/init.hpp"

namespace gocard {

std::string head_kind_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::kLight:
      return "light";
    case HeadKind::kInt:
      return "int";
    case HeadKind::kFull:
      return "full";
  }
  throw ConfigError("unknown head kind");
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "light") return HeadKind::kLight;
  if (name == "int") return HeadKind::kInt;
  if (name == "full") return HeadKind::kFull;
  throw ConfigError("unknown head kind '" + name + "'");
}

std::string backbone_kind_name(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::kDarknetMini:
      return "darknet_mini";
    case BackboneKind::kTinydarknetMini:
      return "tinydarknet_mini";
    case BackboneKind::kSqueezenetMini:
      return "squeezenet_mini";
  }
  throw ConfigError("unknown backbone kind");
}

BackboneKind backbone_kind_from_name(const std::string& name) {
  if (name == "darknet_mini") return BackboneKind::kDarknetMini;
  if (name == "tinydarknet_mini") return BackboneKind::kTinydarknetMini;
  if (name == "squeezenet_mini") return BackboneKind::kSqueezenetMini;
  throw ConfigError("unknown backbone kind '" + name + "'");
}

nlohmann::json BuildConfig::to_json() const {
  return {{"input_size", input_size},
          {"input_channels", input_channels},
          {"width_factor", width_factor},
          {"seed", seed}};
}

BuildConfig BuildConfig::from_json(const nlohmann::json& j) {
  BuildConfig c;
  c.input_size = j.at("input_size").get<int>();
  c.input_channels = j.at("input_channels").get<int>();
  c.width_factor = j.at("width_factor").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

namespace {

int scaled(double width_factor, int reference) {
  return std::max(1, static_cast<int>(std::llround(reference * width_factor)));
}

std::unique_ptr<ConvLayer> conv_layer(const std::string& name, int f, int s, Padding p, int cin,
                                      int cout, ActKind act, Rng& rng) {
  return std::make_unique<ConvLayer>(name, make_conv(f, s, p, cin, cout, act, rng));
}

// Shared recognition feature extractor: three halvings, widths along the
// 64/128/256/512 reference ladder.
int build_recognition_base(Sequential& net, const BuildConfig& cfg, Rng& rng) {
  const double wf = cfg.width_factor;
  int c = cfg.input_channels;
  int idx = 0;
  const int widths[4] = {scaled(wf, 64), scaled(wf, 128), scaled(wf, 256), scaled(wf, 512)};
  for (int stage = 0; stage < 4; ++stage) {
    net.add(conv_layer("base." + std::to_string(idx++) + ".conv", 3, 1, Padding::kSame, c,
                       widths[stage], ActKind::kRelu, rng));
    c = widths[stage];
    if (stage < 3) {
      net.add(std::make_unique<PoolLayer>("base." + std::to_string(idx++) + ".pool", 2, 2,
                                          PoolKind::kMax));
    }
  }
  return c;
}

}  // namespace

RecognitionModel build_recognition(HeadKind head_kind, int num_classes,
                                   const BuildConfig& config) {
  if (num_classes < 2) throw ConfigError("recognition needs at least 2 classes");
  if (config.input_size < 16 || config.input_size % 8 != 0) {
    throw GeometryError("recognition input size must be a multiple of 8, at least 16");
  }
  Rng rng(config.seed);
  RecognitionModel model;
  model.head_kind = head_kind;
  model.num_classes = num_classes;
  model.config = config;

  const int base_channels = build_recognition_base(model.net, config, rng);
  model.base_layer_count = model.net.layer_count();
  const double wf = config.width_factor;
  const int spatial = config.input_size / 8;
  int idx = 0;
  auto hname = [&idx](const char* type) {
    return "head." + std::to_string(idx++) + "." + type;
  };

  int feat = 0;
  switch (head_kind) {
    case HeadKind::kLight: {
      model.net.add(std::make_unique<GlobalMaxPoolLayer>(hname("gmp")));
      const int d1 = scaled(wf, 512), d2 = scaled(wf, 256);
      model.net.add(std::make_unique<DenseLayer>(
          hname("dense"), init_weights({d1, base_channels}, base_channels, d1, ActKind::kRelu, rng),
          Tensor::zeros({d1}, true), ActKind::kRelu));
      model.net.add(std::make_unique<DropoutLayer>(hname("dropout"), 0.5));
      model.net.add(std::make_unique<DenseLayer>(
          hname("dense"), init_weights({d2, d1}, d1, d2, ActKind::kRelu, rng),
          Tensor::zeros({d2}, true), ActKind::kRelu));
      model.net.add(std::make_unique<DropoutLayer>(hname("dropout"), 0.5));
      feat = d2;
      break;
    }
    case HeadKind::kInt: {
      const int cw = scaled(wf, 2048);
      model.net.add(conv_layer(hname("conv"), 3, 1, Padding::kValid, base_channels, cw,
                               ActKind::kRelu, rng));
      model.net.add(std::make_unique<FlattenLayer>(hname("flatten")));
      const int flat = (spatial - 2) * (spatial - 2) * cw;
      const int d1 = scaled(wf, 1024), d2 = scaled(wf, 256);
      model.net.add(std::make_unique<DenseLayer>(
          hname("dense"), init_weights({d1, flat}, flat, d1, ActKind::kSigmoid, rng),
          Tensor::zeros({d1}, true), ActKind::kSigmoid));
      model.net.add(std::make_unique<DenseLayer>(
          hname("dense"), init_weights({d2, d1}, d1, d2, ActKind::kRelu, rng),
          Tensor::zeros({d2}, true), ActKind::kRelu));
      feat = d2;
      break;
    }
    case HeadKind::kFull: {
      const int cw = scaled(wf, 1024);
      model.net.add(conv_layer(hname("conv"), 3, 1, Padding::kValid, base_channels, cw,
                               ActKind::kRelu, rng));
      model.net.add(std::make_unique<FlattenLayer>(hname("flatten")));
      const int flat = (spatial - 2) * (spatial - 2) * cw;
      const int d1 = scaled(wf, 1024), d2 = scaled(wf, 256);
      model.net.add(std::make_unique<DenseLayer>(
          hname("dense"), init_weights({d1, flat}, flat, d1, ActKind::kSigmoid, rng),
          Tensor::zeros({d1}, true), ActKind::kSigmoid));
      model.net.add(std::make_unique<DenseLayer>(
          hname("dense"), init_weights({d2, d1}, d1, d2, ActKind::kSigmoid, rng),
          Tensor::zeros({d2}, true), ActKind::kSigmoid));
      feat = d2;
      break;
    }
  }

  model.net.add(std::make_unique<DenseLayer>(
      hname("classifier"), init_weights({num_classes, feat}, feat, num_classes,
                                        ActKind::kSoftmax, rng),
      Tensor::zeros({num_classes}, true), ActKind::kSoftmax));

  apply_freeze(model, head_kind == HeadKind::kFull ? FreezePolicy::none()
                                                   : FreezePolicy::base_frozen());
  return model;
}

namespace {

int downsample_stages(int input_size, int grid_size) {
  if (grid_size <= 0 || input_size <= 0 || input_size % grid_size != 0) {
    throw GeometryError("input size " + std::to_string(input_size) +
                        " is not divisible by grid size " + std::to_string(grid_size));
  }
  int ratio = input_size / grid_size;
  int stages = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0) {
      throw GeometryError("input/grid ratio must be a power of two, got " +
                          std::to_string(input_size / grid_size));
    }
    ratio /= 2;
    ++stages;
  }
  if (stages == 0) throw GeometryError("detection backbone needs at least one downsample");
  return stages;
}

}  // namespace

DetectionModel build_detection(BackboneKind backbone_kind, int grid_size, const AnchorSet& anchors,
                               int num_classes, const BuildConfig& config) {
  if (num_classes < 1) throw ConfigError("detection needs at least 1 class");
  anchors.validate();
  const int stages = downsample_stages(config.input_size, grid_size);

  Rng rng(config.seed);
  DetectionModel model;
  model.backbone_kind = backbone_kind;
  model.grid_size = grid_size;
  model.num_classes = num_classes;
  model.anchors = anchors;
  model.config = config;

  const double wf = config.width_factor;
  int c = config.input_channels;
  int idx = 0;
  auto bname = [&idx](const char* type) {
    return "base." + std::to_string(idx++) + "." + type;
  };

  switch (backbone_kind) {
    case BackboneKind::kDarknetMini: {
      const int stem = scaled(wf, 32);
      model.net.add(conv_layer(bname("conv"), 3, 1, Padding::kSame, c, stem, ActKind::kLeakyRelu,
                               rng));
      c = stem;
      for (int i = 0; i < stages; ++i) {
        const int w = scaled(wf, std::min(64 << i, 512));
        model.net.add(conv_layer(bname("conv"), 3, 2, Padding::kSame, c, w, ActKind::kLeakyRelu,
                                 rng));
        c = w;
        ResidualSpec res;
        const int mid = std::max(1, w / 2);
        res.inner_layers = {make_conv(1, 1, Padding::kValid, w, mid, ActKind::kLeakyRelu, rng),
                            make_conv(3, 1, Padding::kSame, mid, w, ActKind::kLeakyRelu, rng)};
        model.net.add(std::make_unique<ResidualLayer>(bname("res"), std::move(res)));
      }
      break;
    }
    case BackboneKind::kTinydarknetMini: {
      const int stem = scaled(wf, 16);
      model.net.add(conv_layer(bname("conv"), 3, 1, Padding::kSame, c, stem, ActKind::kLeakyRelu,
                               rng));
      c = stem;
      for (int i = 0; i < stages; ++i) {
        model.net.add(std::make_unique<PoolLayer>(bname("pool"), 2, 2, PoolKind::kMax));
        const int w = scaled(wf, std::min(32 << i, 256));
        model.net.add(conv_layer(bname("conv"), 3, 1, Padding::kSame, c, w, ActKind::kLeakyRelu,
                                 rng));
        c = w;
      }
      break;
    }
    case BackboneKind::kSqueezenetMini: {
      const int stem = scaled(wf, 64);
      model.net.add(conv_layer(bname("conv"), 3, 1, Padding::kSame, c, stem, ActKind::kLeakyRelu,
                               rng));
      c = stem;
      for (int i = 0; i < stages; ++i) {
        model.net.add(std::make_unique<PoolLayer>(bname("pool"), 2, 2, PoolKind::kMax));
        const int squeeze = scaled(wf, std::min(16 << i, 64));
        const int expand = 2 * squeeze;
        FireSpec fire;
        fire.squeeze = make_conv(1, 1, Padding::kValid, c, squeeze, ActKind::kLeakyRelu, rng);
        fire.expand1x1 = make_conv(1, 1, Padding::kValid, squeeze, expand, ActKind::kLeakyRelu,
                                   rng);
        fire.expand3x3 = make_conv(3, 1, Padding::kSame, squeeze, expand, ActKind::kLeakyRelu,
                                   rng);
        model.net.add(std::make_unique<FireLayer>(bname("fire"), std::move(fire)));
        c = 2 * expand;
      }
      break;
    }
  }
  model.base_layer_count = model.net.layer_count();

  int hidx = 0;
  auto hname = [&hidx](const char* type) {
    return "head." + std::to_string(hidx++) + "." + type;
  };
  const int mid = scaled(wf, 256);
  model.net.add(conv_layer(hname("conv"), 3, 1, Padding::kSame, c, mid, ActKind::kLeakyRelu, rng));
  const int out_depth = anchors.size() * (5 + num_classes);
  model.net.add(conv_layer(hname("conv"), 1, 1, Padding::kValid, mid, out_depth,
                           ActKind::kIdentity, rng));
  return model;
}

void apply_freeze(Sequential& net, int base_layer_count, const FreezePolicy& policy) {
  switch (policy.mode) {
    case FreezePolicy::Mode::kNone:
      for (auto& p : net.parameters()) p.tensor.set_requires_grad(true);
      return;
    case FreezePolicy::Mode::kBaseFrozen:
      for (int i = 0; i < net.layer_count(); ++i) {
        const bool trainable = i >= base_layer_count;
        for (auto& p : net.layer(i).parameters()) p.tensor.set_requires_grad(trainable);
      }
      return;
    case FreezePolicy::Mode::kAllButLastK: {
      const std::vector<int> pls = net.parameterized_layers();
      if (policy.k <= 0 || policy.k > static_cast<int>(pls.size())) {
        throw ConfigError("freeze depth " + std::to_string(policy.k) + " out of range for " +
                          std::to_string(pls.size()) + " parameterized layers");
      }
      const int boundary = static_cast<int>(pls.size()) - policy.k;
      for (int pos = 0; pos < static_cast<int>(pls.size()); ++pos) {
        for (auto& p : net.layer(pls[static_cast<std::size_t>(pos)]).parameters()) {
          p.tensor.set_requires_grad(pos >= boundary);
        }
      }
      return;
    }
  }
  throw ConfigError("unknown freeze mode");
}

void apply_freeze(RecognitionModel& model, const FreezePolicy& policy) {
  apply_freeze(model.net, model.base_layer_count, policy);
}

void apply_freeze(DetectionModel& model, const FreezePolicy& policy) {
  apply_freeze(model.net, model.base_layer_count, policy);
}

long long parameter_count(const Sequential& net) {
  long long total = 0;
  for (const auto& p : net.parameters()) total += p.tensor.numel();
  return total;
}

}  // namespace gocard
