#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gocard/blocks.hpp"
#include "gocard/ops.hpp"
#include "gocard/rng.hpp"
#include "gocard/tensor.hpp"

namespace gocard {

// Live handle to a parameter tensor; freezing or updating through it is seen
// by the owning layer.
struct ParamRef {
  std::string name;
  Tensor tensor;
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& input, bool training, Rng& rng) = 0;
  virtual std::vector<ParamRef> parameters() { return {}; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class ConvLayer : public Layer {
 public:
  ConvLayer(std::string name, ConvSpec spec) : Layer(std::move(name)), spec_(std::move(spec)) {}
  Tensor forward(const Tensor& input, bool, Rng&) override { return conv2d(input, spec_); }
  std::vector<ParamRef> parameters() override {
    return {{name() + ".weights", spec_.weights}, {name() + ".bias", spec_.bias}};
  }
  const ConvSpec& spec() const { return spec_; }

 private:
  ConvSpec spec_;
};

class PoolLayer : public Layer {
 public:
  PoolLayer(std::string name, int filter_size, int stride, PoolKind kind)
      : Layer(std::move(name)), filter_size_(filter_size), stride_(stride), kind_(kind) {}
  Tensor forward(const Tensor& input, bool, Rng&) override {
    return pool2d(input, filter_size_, stride_, kind_);
  }

 private:
  int filter_size_;
  int stride_;
  PoolKind kind_;
};

class GlobalMaxPoolLayer : public Layer {
 public:
  explicit GlobalMaxPoolLayer(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& input, bool, Rng&) override { return global_max_pool(input); }
};

class FlattenLayer : public Layer {
 public:
  explicit FlattenLayer(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& input, bool, Rng&) override {
    const Shape& s = input.shape();
    if (s.size() == 4) return reshape(input, {s[0], input.numel() / s[0]});
    return reshape(input, {input.numel()});
  }
};

class DenseLayer : public Layer {
 public:
  DenseLayer(std::string name, Tensor weights, Tensor bias, ActKind activation)
      : Layer(std::move(name)),
        weights_(std::move(weights)),
        bias_(std::move(bias)),
        activation_(activation) {}
  Tensor forward(const Tensor& input, bool, Rng&) override {
    return dense(input, weights_, bias_, activation_);
  }
  std::vector<ParamRef> parameters() override {
    return {{name() + ".weights", weights_}, {name() + ".bias", bias_}};
  }

 private:
  Tensor weights_;
  Tensor bias_;
  ActKind activation_;
};

class DropoutLayer : public Layer {
 public:
  DropoutLayer(std::string name, double rate) : Layer(std::move(name)), rate_(rate) {}
  Tensor forward(const Tensor& input, bool training, Rng& rng) override {
    return dropout(input, rate_, training, rng);
  }

 private:
  double rate_;
};

class ResidualLayer : public Layer {
 public:
  ResidualLayer(std::string name, ResidualSpec spec)
      : Layer(std::move(name)), spec_(std::move(spec)) {}
  Tensor forward(const Tensor& input, bool, Rng&) override {
    return residual_block(input, spec_);
  }
  std::vector<ParamRef> parameters() override {
    std::vector<ParamRef> params;
    for (std::size_t i = 0; i < spec_.inner_layers.size(); ++i) {
      const std::string base = name() + ".inner" + std::to_string(i);
      params.push_back({base + ".weights", spec_.inner_layers[i].weights});
      params.push_back({base + ".bias", spec_.inner_layers[i].bias});
    }
    if (spec_.projection) {
      params.push_back({name() + ".proj.weights", spec_.projection->weights});
      params.push_back({name() + ".proj.bias", spec_.projection->bias});
    }
    return params;
  }

 private:
  ResidualSpec spec_;
};

class FireLayer : public Layer {
 public:
  FireLayer(std::string name, FireSpec spec) : Layer(std::move(name)), spec_(std::move(spec)) {}
  Tensor forward(const Tensor& input, bool, Rng&) override { return fire_module(input, spec_); }
  std::vector<ParamRef> parameters() override {
    return {{name() + ".squeeze.weights", spec_.squeeze.weights},
            {name() + ".squeeze.bias", spec_.squeeze.bias},
            {name() + ".expand1x1.weights", spec_.expand1x1.weights},
            {name() + ".expand1x1.bias", spec_.expand1x1.bias},
            {name() + ".expand3x3.weights", spec_.expand3x3.weights},
            {name() + ".expand3x3.bias", spec_.expand3x3.bias}};
  }

 private:
  FireSpec spec_;
};

class Sequential {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Tensor forward(const Tensor& input, bool training, Rng& rng) const {
    Tensor h = input;
    for (const auto& layer : layers_) h = layer->forward(h, training, rng);
    return h;
  }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  Layer& layer(int i) { return *layers_[static_cast<std::size_t>(i)]; }
  const Layer& layer(int i) const { return *layers_[static_cast<std::size_t>(i)]; }

  std::vector<ParamRef> parameters() const {
    std::vector<ParamRef> params;
    for (const auto& layer : layers_) {
      for (auto& p : layer->parameters()) params.push_back(std::move(p));
    }
    return params;
  }

  // Indices of layers that own parameters, in network order.
  std::vector<int> parameterized_layers() const {
    std::vector<int> idx;
    for (int i = 0; i < layer_count(); ++i) {
      if (!layers_[static_cast<std::size_t>(i)]->parameters().empty()) idx.push_back(i);
    }
    return idx;
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace gocard
