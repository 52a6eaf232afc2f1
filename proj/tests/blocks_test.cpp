#include <doctest.h>

#include <cmath>
#include <vector>

#include "gocard/blocks.hpp"
#include "gocard/errors.hpp"
#include "gocard/init.hpp"
#include "gocard/rng.hpp"

using namespace gocard;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : data) v = rng.uniform(lo, hi);
  return Tensor::from_data(shape, data);
}

ConvSpec identity_1x1(int channels) {
  ConvSpec spec;
  spec.filter_size = 1;
  spec.stride = 1;
  spec.padding = Padding::kValid;
  spec.in_channels = channels;
  spec.out_channels = channels;
  std::vector<double> eye(static_cast<std::size_t>(channels * channels), 0.0);
  for (int i = 0; i < channels; ++i) eye[static_cast<std::size_t>(i * channels + i)] = 1.0;
  spec.weights = Tensor::from_data({1, 1, channels, channels}, eye);
  spec.bias = Tensor::zeros({channels});
  spec.activation = ActKind::kIdentity;
  return spec;
}

}  // namespace

TEST_CASE("residual block: zero inner weights pass nonnegative input through") {
  Rng rng(21);
  ResidualSpec spec;
  ConvSpec inner = make_conv(3, 1, Padding::kSame, 2, 2, ActKind::kRelu, rng);
  inner.weights = Tensor::zeros({3, 3, 2, 2});
  inner.bias = Tensor::zeros({2});
  spec.inner_layers = {inner};

  Tensor x = random_tensor({4, 4, 2}, rng, 0.1, 1.0);
  Tensor out = residual_block(x, spec);
  REQUIRE(out.shape() == x.shape());
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.numel()); ++i) {
    CHECK(out.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("residual block: identity inner layer doubles the input") {
  Rng rng(22);
  ResidualSpec spec;
  spec.inner_layers = {identity_1x1(3)};
  Tensor x = random_tensor({3, 3, 3}, rng);
  Tensor out = residual_block(x, spec);
  for (std::size_t i = 0; i < static_cast<std::size_t>(x.numel()); ++i) {
    CHECK(out.values()[i] == doctest::Approx(2.0 * x.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("residual block: channel change without projection is rejected") {
  Rng rng(23);
  ResidualSpec spec;
  spec.inner_layers = {make_conv(3, 1, Padding::kSame, 2, 4, ActKind::kRelu, rng)};
  Tensor x = random_tensor({4, 4, 2}, rng);
  CHECK_THROWS_AS(residual_block(x, spec), GeometryError);

  spec.projection = make_conv(1, 1, Padding::kValid, 2, 4, ActKind::kIdentity, rng);
  CHECK(residual_block(x, spec).shape() == Shape{4, 4, 4});
}

TEST_CASE("residual block gradient check") {
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(2300 + seed);
    ResidualSpec spec;
    spec.inner_layers = {make_conv(3, 1, Padding::kSame, 2, 3, ActKind::kSigmoid, rng),
                         make_conv(3, 1, Padding::kSame, 3, 4, ActKind::kSigmoid, rng)};
    spec.projection = make_conv(1, 1, Padding::kValid, 2, 4, ActKind::kIdentity, rng);
    auto f = [&](const Tensor& t) { return sum(residual_block(t, spec)); };
    CHECK(grad_check(f, random_tensor({5, 5, 2}, rng), 1e-5) < 1e-4);
  }
}

TEST_CASE("inception block: identity branches stack the input") {
  Rng rng(24);
  InceptionSpec spec;
  spec.branches = {{identity_1x1(2)}, {identity_1x1(2)}};
  Tensor x = random_tensor({3, 4, 2}, rng);
  Tensor out = inception_block(x, spec);
  REQUIRE(out.shape() == Shape{3, 4, 4});
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double v = x.values()[static_cast<std::size_t>(r * 2 + c)];
      CHECK(out.values()[static_cast<std::size_t>(r * 4 + c)] == doctest::Approx(v));
      CHECK(out.values()[static_cast<std::size_t>(r * 4 + 2 + c)] == doctest::Approx(v));
    }
  }
}

TEST_CASE("inception block: output channels sum over branches") {
  Rng rng(25);
  InceptionSpec spec;
  spec.branches = {{make_conv(1, 1, Padding::kValid, 4, 8, ActKind::kRelu, rng)},
                   {make_conv(3, 1, Padding::kSame, 4, 16, ActKind::kRelu, rng)}};
  Tensor out = inception_block(random_tensor({6, 6, 4}, rng), spec);
  CHECK(out.shape() == Shape{6, 6, 24});

  // A same-padded pool branch keeps dims; a valid conv branch shrinks and
  // breaks the concat.
  InceptionSpec bad;
  bad.branches = {{make_conv(1, 1, Padding::kValid, 4, 8, ActKind::kRelu, rng)},
                  {make_conv(3, 1, Padding::kValid, 4, 8, ActKind::kRelu, rng)}};
  CHECK_THROWS_AS(inception_block(random_tensor({6, 6, 4}, rng), bad), GeometryError);

  InceptionSpec single;
  single.branches = {{identity_1x1(4)}};
  CHECK_THROWS_AS(inception_block(random_tensor({6, 6, 4}, rng), single), ConfigError);
}

TEST_CASE("inception block with pooling branch and gradient check") {
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(2500 + seed);
    InceptionSpec spec;
    spec.branches = {{make_conv(1, 1, Padding::kValid, 2, 3, ActKind::kSigmoid, rng)},
                     {make_conv(3, 1, Padding::kSame, 2, 4, ActKind::kSigmoid, rng)},
                     {PoolStep{3, 1, PoolKind::kAvg},
                      make_conv(1, 1, Padding::kValid, 2, 2, ActKind::kSigmoid, rng)}};
    // The pool branch uses stride 1 window 3 on 5x5 input: spatial 3x3, so pad
    // the conv branches down to match via valid 3x3.
    InceptionSpec aligned;
    aligned.branches = {{make_conv(3, 1, Padding::kValid, 2, 3, ActKind::kSigmoid, rng)},
                        {PoolStep{3, 1, PoolKind::kAvg},
                         make_conv(1, 1, Padding::kValid, 2, 2, ActKind::kSigmoid, rng)}};
    Tensor x = random_tensor({5, 5, 2}, rng);
    Tensor out = inception_block(x, aligned);
    CHECK(out.shape() == Shape{3, 3, 5});
    auto f = [&](const Tensor& t) { return sum(inception_block(t, aligned)); };
    CHECK(grad_check(f, x, 1e-5) < 1e-4);
  }
}

TEST_CASE("fire module: channel arithmetic and squeeze invariant") {
  Rng rng(26);
  FireSpec spec;
  spec.squeeze = make_conv(1, 1, Padding::kValid, 4, 2, ActKind::kRelu, rng);
  spec.expand1x1 = make_conv(1, 1, Padding::kValid, 2, 3, ActKind::kRelu, rng);
  spec.expand3x3 = make_conv(3, 1, Padding::kSame, 2, 5, ActKind::kRelu, rng);
  Tensor out = fire_module(random_tensor({6, 6, 4}, rng), spec);
  CHECK(out.shape() == Shape{6, 6, 8});

  FireSpec fat = spec;
  fat.squeeze = make_conv(1, 1, Padding::kValid, 4, 9, ActKind::kRelu, rng);
  fat.expand1x1.in_channels = 9;
  fat.expand1x1.weights = Tensor::zeros({1, 1, 9, 3});
  fat.expand3x3.in_channels = 9;
  fat.expand3x3.weights = Tensor::zeros({3, 3, 9, 5});
  CHECK_THROWS_AS(fire_module(random_tensor({6, 6, 4}, rng), fat), ConfigError);
}

TEST_CASE("fire module forward matches a hand weight-sum oracle") {
  Rng rng(27);
  const double c = 0.37;
  const int cin = 3, cs = 2, e1 = 2, e3 = 2;
  FireSpec spec;
  spec.squeeze = make_conv(1, 1, Padding::kValid, cin, cs, ActKind::kRelu, rng);
  spec.expand1x1 = make_conv(1, 1, Padding::kValid, cs, e1, ActKind::kRelu, rng);
  spec.expand3x3 = make_conv(3, 1, Padding::kSame, cs, e3, ActKind::kRelu, rng);
  spec.squeeze.bias = Tensor::zeros({cs});
  spec.expand1x1.bias = Tensor::zeros({e1});
  spec.expand3x3.bias = Tensor::zeros({e3});

  Tensor x = Tensor::full({5, 5, cin}, c);
  Tensor out = fire_module(x, spec);
  REQUIRE(out.shape() == Shape{5, 5, e1 + e3});

  // Squeeze output is spatially constant: s_j = relu(c * sum_i w[i,j]).
  std::vector<double> s(static_cast<std::size_t>(cs));
  for (int j = 0; j < cs; ++j) {
    double acc = 0.0;
    for (int i = 0; i < cin; ++i) {
      acc += spec.squeeze.weights.values()[static_cast<std::size_t>(i * cs + j)];
    }
    s[static_cast<std::size_t>(j)] = std::max(0.0, c * acc);
  }
  // 1x1 expansion stays constant everywhere.
  for (int j = 0; j < e1; ++j) {
    double acc = 0.0;
    for (int i = 0; i < cs; ++i) {
      acc += s[static_cast<std::size_t>(i)] *
             spec.expand1x1.weights.values()[static_cast<std::size_t>(i * e1 + j)];
    }
    const double expect = std::max(0.0, acc);
    for (int pix = 0; pix < 25; ++pix) {
      CHECK(out.values()[static_cast<std::size_t>(pix * (e1 + e3) + j)] ==
            doctest::Approx(expect).epsilon(1e-10));
    }
  }
  // 3x3 same-padded expansion is constant over interior pixels, where the
  // window never touches padding: full 9-tap weight sum applies.
  for (int j = 0; j < e3; ++j) {
    double acc = 0.0;
    for (int tap = 0; tap < 9; ++tap) {
      for (int i = 0; i < cs; ++i) {
        acc += s[static_cast<std::size_t>(i)] *
               spec.expand3x3.weights.values()[static_cast<std::size_t>((tap * cs + i) * e3 + j)];
      }
    }
    const double expect = std::max(0.0, acc);
    for (int y = 1; y <= 3; ++y) {
      for (int xpix = 1; xpix <= 3; ++xpix) {
        CHECK(out.values()[static_cast<std::size_t>((y * 5 + xpix) * (e1 + e3) + e1 + j)] ==
              doctest::Approx(expect).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("fire module gradient check") {
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(2700 + seed);
    FireSpec spec;
    spec.squeeze = make_conv(1, 1, Padding::kValid, 3, 2, ActKind::kSigmoid, rng);
    spec.expand1x1 = make_conv(1, 1, Padding::kValid, 2, 2, ActKind::kSigmoid, rng);
    spec.expand3x3 = make_conv(3, 1, Padding::kSame, 2, 3, ActKind::kSigmoid, rng);
    auto f = [&](const Tensor& t) { return sum(fire_module(t, spec)); };
    CHECK(grad_check(f, random_tensor({4, 4, 3}, rng), 1e-5) < 1e-4);
  }
}

TEST_CASE("a stack of eight residual blocks trains on a toy regression") {
  Rng rng(28);
  std::vector<ResidualSpec> stack;
  std::vector<Tensor> params;
  for (int i = 0; i < 8; ++i) {
    ResidualSpec spec;
    spec.inner_layers = {make_conv(3, 1, Padding::kSame, 2, 2, ActKind::kLeakyRelu, rng)};
    params.push_back(spec.inner_layers[0].weights);
    params.push_back(spec.inner_layers[0].bias);
    stack.push_back(spec);
  }

  Tensor x = random_tensor({4, 4, 2}, rng, 0.1, 0.9);
  Tensor target = random_tensor({4, 4, 2}, rng, 0.2, 0.8);
  const double inv_n = 1.0 / x.numel();

  auto forward_loss = [&]() {
    Tensor h = x;
    for (const auto& spec : stack) h = residual_block(h, spec);
    Tensor diff = add(h, mul_scalar(target, -1.0));
    return mul_scalar(sum(mul(diff, diff)), inv_n);
  };

  double prev = forward_loss().item();
  const double lr = 0.01;
  for (int step = 0; step < 50; ++step) {
    for (auto& p : params) p.zero_grad();
    Tensor l = forward_loss();
    l.backward();
    for (auto& p : params) {
      auto vals = p.mutable_values();
      auto grads = p.grad();
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] -= lr * grads[i];
    }
    const double cur = forward_loss().item();
    CHECK(cur < prev);
    prev = cur;
  }
}
