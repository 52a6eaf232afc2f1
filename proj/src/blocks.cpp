#include "gocard/blocks.hpp"

#include "gocard/errors.hpp"

namespace gocard {

void ResidualSpec::validate() const {
  if (inner_layers.empty()) throw ConfigError("residual block needs at least one inner layer");
  for (const auto& c : inner_layers) c.validate();
  if (projection) {
    projection->validate();
    if (projection->filter_size != 1) {
      throw ConfigError("residual projection must be a 1x1 convolution");
    }
  }
}

Tensor residual_block(const Tensor& input, const ResidualSpec& spec) {
  spec.validate();
  Tensor h = input;
  for (std::size_t i = 0; i + 1 < spec.inner_layers.size(); ++i) {
    h = conv2d(h, spec.inner_layers[i]);
  }
  ConvSpec last = spec.inner_layers.back();
  const ActKind out_act = last.activation;
  last.activation = ActKind::kIdentity;
  Tensor z = conv2d(h, last);

  Tensor skip = input;
  if (spec.projection) {
    ConvSpec proj = *spec.projection;
    proj.activation = ActKind::kIdentity;
    skip = conv2d(input, proj);
  }
  if (skip.shape() != z.shape()) {
    throw GeometryError("residual skip shape " + shape_str(skip.shape()) +
                        " does not match inner output " + shape_str(z.shape()) +
                        (spec.projection ? "" : "; a projection is required"));
  }
  return activate(add(z, skip), out_act);
}

void InceptionSpec::validate() const {
  if (branches.size() < 2) throw ConfigError("inception block needs at least two branches");
  for (const auto& branch : branches) {
    if (branch.empty()) throw ConfigError("inception branch cannot be empty");
    for (const auto& step : branch) {
      if (const auto* conv = std::get_if<ConvSpec>(&step)) {
        conv->validate();
      } else {
        const auto& pool = std::get<PoolStep>(step);
        if (pool.filter_size <= 0 || pool.stride <= 0) {
          throw ConfigError("pool step needs positive window and stride");
        }
      }
    }
  }
}

Tensor inception_block(const Tensor& input, const InceptionSpec& spec) {
  spec.validate();
  std::vector<Tensor> outputs;
  outputs.reserve(spec.branches.size());
  for (const auto& branch : spec.branches) {
    Tensor h = input;
    for (const auto& step : branch) {
      if (const auto* conv = std::get_if<ConvSpec>(&step)) {
        h = conv2d(h, *conv);
      } else {
        const auto& pool = std::get<PoolStep>(step);
        h = pool2d(h, pool.filter_size, pool.stride, pool.kind);
      }
    }
    outputs.push_back(h);
  }
  return concat_channels(outputs);
}

void FireSpec::validate() const {
  squeeze.validate();
  expand1x1.validate();
  expand3x3.validate();
  if (squeeze.filter_size != 1) throw ConfigError("fire squeeze must be a 1x1 convolution");
  if (expand1x1.filter_size != 1) throw ConfigError("fire 1x1 expansion must have filter size 1");
  if (expand3x3.filter_size != 3 || expand3x3.padding != Padding::kSame) {
    throw ConfigError("fire 3x3 expansion must be a same-padded 3x3 convolution");
  }
  if (expand1x1.in_channels != squeeze.out_channels ||
      expand3x3.in_channels != squeeze.out_channels) {
    throw DimensionError("fire expansions must consume the squeeze output channels");
  }
  if (squeeze.out_channels >= expand1x1.out_channels + expand3x3.out_channels) {
    throw ConfigError("fire squeeze width must be below the combined expansion width");
  }
}

Tensor fire_module(const Tensor& input, const FireSpec& spec) {
  spec.validate();
  Tensor squeezed = conv2d(input, spec.squeeze);
  Tensor e1 = conv2d(squeezed, spec.expand1x1);
  Tensor e3 = conv2d(squeezed, spec.expand3x3);
  return concat_channels({e1, e3});
}

}  // namespace gocard
