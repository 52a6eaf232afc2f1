#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "gocard/ops.hpp"
#include "gocard/tensor.hpp"

namespace gocard {

// Skip connection around a conv stack. The last inner layer's activation acts
// as the block output activation: out = act(affine(inner...) + skip), with the
// skip optionally passed through a 1x1 projection when shapes differ.
struct ResidualSpec {
  std::vector<ConvSpec> inner_layers;
  std::optional<ConvSpec> projection;
  void validate() const;
};

Tensor residual_block(const Tensor& input, const ResidualSpec& spec);

struct PoolStep {
  int filter_size = 2;
  int stride = 1;
  PoolKind kind = PoolKind::kMax;
};

using BranchOp = std::variant<ConvSpec, PoolStep>;

// Parallel branches whose outputs concatenate along channels. Branches must
// preserve a common spatial footprint for the concat to be defined.
struct InceptionSpec {
  std::vector<std::vector<BranchOp>> branches;
  void validate() const;
};

Tensor inception_block(const Tensor& input, const InceptionSpec& spec);

// 1x1 squeeze followed by parallel 1x1 and 3x3 (same padding) expansions.
struct FireSpec {
  ConvSpec squeeze;
  ConvSpec expand1x1;
  ConvSpec expand3x3;
  void validate() const;
};

Tensor fire_module(const Tensor& input, const FireSpec& spec);

}  // namespace gocard
