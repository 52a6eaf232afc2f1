#pragma once

#include <functional>
#include <vector>

#include "gocard/rng.hpp"
#include "gocard/tensor.hpp"

namespace gocard {

enum class Padding { kValid, kSame };
enum class ActKind { kIdentity, kRelu, kLeakyRelu, kSigmoid, kSoftmax };
enum class PoolKind { kMax, kAvg };

// Convolution descriptor. Filters are square with odd side f, stored as
// (f, f, in_channels, out_channels); bias is (out_channels). Valid padding
// means p = 0, same padding p = (f - 1) / 2.
struct ConvSpec {
  int filter_size = 1;
  int stride = 1;
  Padding padding = Padding::kValid;
  int in_channels = 1;
  int out_channels = 1;
  Tensor weights;
  Tensor bias;
  ActKind activation = ActKind::kIdentity;

  int pad() const { return padding == Padding::kSame ? (filter_size - 1) / 2 : 0; }
  void validate() const;
};

// Output spatial extent: floor((n + 2p - f) / s) + 1.
int conv_out_dim(int n, int f, int p, int s);

// Spatial convolution with bias and activation. Input is (H, W, C) or
// (N, H, W, C); output channels are spec.out_channels.
Tensor conv2d(const Tensor& input, const ConvSpec& spec);

// Window pooling with p = 0; channels pass through unchanged.
Tensor pool2d(const Tensor& input, int f, int s, PoolKind kind);

// Fully connected layer: z = W a + b, then activation. weights are
// (out, in), input is (in) or (N, in).
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias, ActKind activation);

Tensor activate(const Tensor& input, ActKind kind);
Tensor relu(const Tensor& input);
Tensor leaky_relu(const Tensor& input, double alpha = 0.1);
Tensor sigmoid(const Tensor& input);
// Normalizes over the last axis; rows are all leading dims.
Tensor softmax(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double c);
Tensor sum(const Tensor& a);
// Concatenates along the channel (last) axis; all inputs must agree on the
// leading dims.
Tensor concat_channels(const std::vector<Tensor>& inputs);
Tensor reshape(const Tensor& a, Shape shape);
// (H, W, C) -> (C) or (N, H, W, C) -> (N, C), max over spatial positions.
Tensor global_max_pool(const Tensor& input);
// Inverted dropout; identity when training is false.
Tensor dropout(const Tensor& input, double rate, bool training, Rng& rng);

enum class LossKind { kWeightedCrossEntropy, kYoloComposite };

struct LossConfig {
  LossKind kind = LossKind::kWeightedCrossEntropy;
  std::vector<double> class_weights;
  int batch_size = 1;

  void validate(int num_classes) const;
};

// Mean over the batch of per-sample class-weighted cross-entropy. pred and
// target are probability vectors of shape (C) or (N, C).
Tensor weighted_cross_entropy(const Tensor& pred, const Tensor& target,
                              const std::vector<double>& class_weights);

// Composite detection loss over a raw grid output of shape
// (S, S, A*(5+C)) or (N, S, S, A*(5+C)). Targets use the same layout with
// per-slot records [ox, oy, log_w, log_h, objectness, one-hot class].
// Coordinate and class terms apply only to assigned (objectness == 1)
// slots; objectness is binary cross-entropy on every slot.
struct YoloLossWeights {
  double coord = 5.0;
  double obj = 1.0;
  double cls = 1.0;
};

Tensor yolo_loss(const Tensor& pred, const Tensor& target, int anchors_per_cell, int num_classes,
                 const std::vector<double>& class_weights, const YoloLossWeights& weights = {});

// Dispatches on cfg.kind; pred/target layouts are those of the two loss ops.
Tensor loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg);

// Max over elements of |analytic - central difference| divided by
// max(|analytic|, |numeric|, 1e-12). f must map a tensor to a scalar.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace gocard
