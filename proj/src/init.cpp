#include "gocard/init.hpp"

#include <cmath>

namespace gocard {

namespace {

Tensor bounded_uniform(const Shape& shape, double limit, Rng& rng, bool requires_grad) {
  std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : data) v = rng.uniform(-limit, limit);
  return Tensor::from_data(shape, data, requires_grad);
}

}  // namespace

Tensor he_uniform(const Shape& shape, int fan_in, Rng& rng, bool requires_grad) {
  return bounded_uniform(shape, std::sqrt(6.0 / fan_in), rng, requires_grad);
}

Tensor glorot_uniform(const Shape& shape, int fan_in, int fan_out, Rng& rng, bool requires_grad) {
  return bounded_uniform(shape, std::sqrt(6.0 / (fan_in + fan_out)), rng, requires_grad);
}

Tensor init_weights(const Shape& shape, int fan_in, int fan_out, ActKind activation, Rng& rng,
                    bool requires_grad) {
  if (activation == ActKind::kRelu || activation == ActKind::kLeakyRelu) {
    return he_uniform(shape, fan_in, rng, requires_grad);
  }
  return glorot_uniform(shape, fan_in, fan_out, rng, requires_grad);
}

ConvSpec make_conv(int filter_size, int stride, Padding padding, int in_channels,
                   int out_channels, ActKind activation, Rng& rng, bool trainable) {
  ConvSpec spec;
  spec.filter_size = filter_size;
  spec.stride = stride;
  spec.padding = padding;
  spec.in_channels = in_channels;
  spec.out_channels = out_channels;
  const int fan_in = filter_size * filter_size * in_channels;
  const int fan_out = filter_size * filter_size * out_channels;
  spec.weights = init_weights({filter_size, filter_size, in_channels, out_channels}, fan_in,
                              fan_out, activation, rng, trainable);
  spec.bias = Tensor::zeros({out_channels}, trainable);
  spec.activation = activation;
  spec.validate();
  return spec;
}

}  // namespace gocard
