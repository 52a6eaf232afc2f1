#pragma once

#include "gocard/ops.hpp"
#include "gocard/rng.hpp"
#include "gocard/tensor.hpp"

namespace gocard {

// He-uniform for rectifier layers, Glorot-uniform otherwise; biases start at
// zero everywhere.
Tensor he_uniform(const Shape& shape, int fan_in, Rng& rng, bool requires_grad = true);
Tensor glorot_uniform(const Shape& shape, int fan_in, int fan_out, Rng& rng,
                      bool requires_grad = true);

// Initializer matched to the activation that will consume the weights.
Tensor init_weights(const Shape& shape, int fan_in, int fan_out, ActKind activation, Rng& rng,
                    bool requires_grad = true);

ConvSpec make_conv(int filter_size, int stride, Padding padding, int in_channels,
                   int out_channels, ActKind activation, Rng& rng, bool trainable = true);

}  // namespace gocard
