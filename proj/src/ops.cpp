#include "gocard/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "gocard/errors.hpp"

namespace gocard {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

int conv_out_dim(int n, int f, int p, int s) { return (n + 2 * p - f) / s + 1; }

void ConvSpec::validate() const {
  if (filter_size <= 0 || filter_size % 2 == 0) {
    throw ConfigError("filter size must be odd and positive, got " + std::to_string(filter_size));
  }
  if (stride <= 0) throw ConfigError("stride must be positive");
  if (in_channels <= 0 || out_channels <= 0) throw ConfigError("channel counts must be positive");
  const Shape want_w{filter_size, filter_size, in_channels, out_channels};
  if (!weights.defined() || weights.shape() != want_w) {
    throw DimensionError("conv weights must have shape " + shape_str(want_w));
  }
  if (!bias.defined() || bias.shape() != Shape{out_channels}) {
    throw DimensionError("conv bias must have shape (" + std::to_string(out_channels) + ")");
  }
}

namespace {

struct SpatialDims {
  bool batched = false;
  int n = 1, h = 0, w = 0, c = 0;
};

SpatialDims spatial_dims(const Tensor& input, const char* what) {
  const Shape& s = input.shape();
  SpatialDims d;
  if (s.size() == 4) {
    d.batched = true;
    d.n = s[0];
    d.h = s[1];
    d.w = s[2];
    d.c = s[3];
  } else if (s.size() == 3) {
    d.h = s[0];
    d.w = s[1];
    d.c = s[2];
  } else {
    throw DimensionError(std::string(what) + " expects a (H,W,C) or (N,H,W,C) tensor, got " +
                         shape_str(s));
  }
  return d;
}

void im2col(const double* x, int h, int w, int c, int f, int s, int p, int oh, int ow,
            double* col) {
  const int k = f * f * c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* row = col + static_cast<std::ptrdiff_t>(oy * ow + ox) * k;
      for (int fi = 0; fi < f; ++fi) {
        const int iy = oy * s + fi - p;
        for (int fj = 0; fj < f; ++fj) {
          const int ix = ox * s + fj - p;
          double* dst = row + (fi * f + fj) * c;
          if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
            std::memcpy(dst, x + static_cast<std::ptrdiff_t>(iy * w + ix) * c,
                        sizeof(double) * static_cast<std::size_t>(c));
          } else {
            std::memset(dst, 0, sizeof(double) * static_cast<std::size_t>(c));
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int h, int w, int c, int f, int s, int p, int oh, int ow,
                double* x_grad) {
  const int k = f * f * c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* row = col + static_cast<std::ptrdiff_t>(oy * ow + ox) * k;
      for (int fi = 0; fi < f; ++fi) {
        const int iy = oy * s + fi - p;
        if (iy < 0 || iy >= h) continue;
        for (int fj = 0; fj < f; ++fj) {
          const int ix = ox * s + fj - p;
          if (ix < 0 || ix >= w) continue;
          const double* src = row + (fi * f + fj) * c;
          double* dst = x_grad + static_cast<std::ptrdiff_t>(iy * w + ix) * c;
          for (int cc = 0; cc < c; ++cc) dst[cc] += src[cc];
        }
      }
    }
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ln(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void softmax_row(const double* z, double* p, int n) {
  double mx = z[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, z[i]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(z[i] - mx);
    total += p[i];
  }
  for (int i = 0; i < n; ++i) p[i] /= total;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvSpec& spec) {
  spec.validate();
  const SpatialDims d = spatial_dims(input, "conv2d");
  if (d.c != spec.in_channels) {
    throw DimensionError("conv2d input has " + std::to_string(d.c) + " channels, spec expects " +
                         std::to_string(spec.in_channels));
  }
  const int f = spec.filter_size;
  const int s = spec.stride;
  const int p = spec.pad();
  if (spec.padding == Padding::kValid && (d.h < f || d.w < f)) {
    throw GeometryError("valid convolution needs spatial dims >= filter size " + std::to_string(f) +
                        ", input is " + shape_str(input.shape()));
  }
  const int oh = conv_out_dim(d.h, f, p, s);
  const int ow = conv_out_dim(d.w, f, p, s);
  if (oh <= 0 || ow <= 0) {
    throw GeometryError("convolution produces empty output for input " + shape_str(input.shape()));
  }
  const int cout = spec.out_channels;
  const Shape out_shape = d.batched ? Shape{d.n, oh, ow, cout} : Shape{oh, ow, cout};

  const int rows = oh * ow;
  const int k = f * f * d.c;
  const SpatialDims dims = d;

  auto backward = [f, s, p, dims, oh, ow, cout, rows, k](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    std::vector<double> col(static_cast<std::size_t>(rows) * k);
    std::vector<double> dcol;
    if (xn.requires_grad) {
      xn.ensure_grad();
      dcol.resize(static_cast<std::size_t>(rows) * k);
    }
    if (wn.requires_grad) wn.ensure_grad();
    if (bn.requires_grad) bn.ensure_grad();
    ConstMapMat wm(wn.values.data(), k, cout);
    for (int n = 0; n < dims.n; ++n) {
      const double* x = xn.values.data() + static_cast<std::ptrdiff_t>(n) * dims.h * dims.w * dims.c;
      const double* dy = self.grad.data() + static_cast<std::ptrdiff_t>(n) * rows * cout;
      ConstMapMat dym(dy, rows, cout);
      if (wn.requires_grad || bn.requires_grad) {
        im2col(x, dims.h, dims.w, dims.c, f, s, p, oh, ow, col.data());
      }
      if (wn.requires_grad) {
        ConstMapMat colm(col.data(), rows, k);
        MapMat dwm(wn.grad.data(), k, cout);
        dwm.noalias() += colm.transpose() * dym;
      }
      if (bn.requires_grad) {
        Eigen::Map<Eigen::VectorXd> dbv(bn.grad.data(), cout);
        dbv.noalias() += dym.colwise().sum().transpose();
      }
      if (xn.requires_grad) {
        MapMat dcolm(dcol.data(), rows, k);
        dcolm.noalias() = dym * wm.transpose();
        double* dx = xn.grad.data() + static_cast<std::ptrdiff_t>(n) * dims.h * dims.w * dims.c;
        col2im_add(dcol.data(), dims.h, dims.w, dims.c, f, s, p, oh, ow, dx);
      }
    }
  };

  Tensor out = make_op_node(out_shape, {input, spec.weights, spec.bias}, backward);
  {
    auto xn = input.node();
    auto wn = spec.weights.node();
    auto bn = spec.bias.node();
    auto on = out.node();
    std::vector<double> col(static_cast<std::size_t>(rows) * k);
    ConstMapMat wm(wn->values.data(), k, cout);
    Eigen::Map<const Eigen::VectorXd> bv(bn->values.data(), cout);
    for (int n = 0; n < d.n; ++n) {
      const double* x = xn->values.data() + static_cast<std::ptrdiff_t>(n) * d.h * d.w * d.c;
      double* y = on->values.data() + static_cast<std::ptrdiff_t>(n) * rows * cout;
      im2col(x, d.h, d.w, d.c, f, s, p, oh, ow, col.data());
      ConstMapMat colm(col.data(), rows, k);
      MapMat ym(y, rows, cout);
      ym.noalias() = colm * wm;
      ym.rowwise() += bv.transpose();
    }
  }
  return activate(out, spec.activation);
}

Tensor pool2d(const Tensor& input, int f, int s, PoolKind kind) {
  if (f <= 0 || s <= 0) throw ConfigError("pool window and stride must be positive");
  const SpatialDims d = spatial_dims(input, "pool2d");
  if (d.h < f || d.w < f) {
    throw GeometryError("pool window " + std::to_string(f) + " exceeds spatial dims of " +
                        shape_str(input.shape()));
  }
  const int oh = conv_out_dim(d.h, f, 0, s);
  const int ow = conv_out_dim(d.w, f, 0, s);
  const Shape out_shape = d.batched ? Shape{d.n, oh, ow, d.c} : Shape{oh, ow, d.c};

  if (kind == PoolKind::kMax) {
    auto argmax = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(d.n) * oh * ow * d.c);
    auto backward = [argmax](detail::TensorNode& self) {
      auto& xn = *self.parents[0];
      if (!xn.requires_grad) return;
      xn.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        xn.grad[static_cast<std::size_t>((*argmax)[i])] += self.grad[i];
      }
    };
    Tensor out = make_op_node(out_shape, {input}, backward);
    const auto& xv = input.node()->values;
    auto& yv = out.node()->values;
    std::size_t oi = 0;
    for (int n = 0; n < d.n; ++n) {
      const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(n) * d.h * d.w * d.c;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          for (int c = 0; c < d.c; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            std::ptrdiff_t best_idx = 0;
            for (int fi = 0; fi < f; ++fi) {
              for (int fj = 0; fj < f; ++fj) {
                const std::ptrdiff_t idx =
                    base + (static_cast<std::ptrdiff_t>(oy * s + fi) * d.w + (ox * s + fj)) * d.c + c;
                if (xv[static_cast<std::size_t>(idx)] > best) {
                  best = xv[static_cast<std::size_t>(idx)];
                  best_idx = idx;
                }
              }
            }
            yv[oi] = best;
            (*argmax)[oi] = static_cast<int>(best_idx);
            ++oi;
          }
        }
      }
    }
    return out;
  }

  const double inv = 1.0 / (static_cast<double>(f) * f);
  auto backward = [f, s, d, oh, ow, inv](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    std::size_t oi = 0;
    for (int n = 0; n < d.n; ++n) {
      const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(n) * d.h * d.w * d.c;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          for (int c = 0; c < d.c; ++c) {
            const double g = self.grad[oi++] * inv;
            for (int fi = 0; fi < f; ++fi) {
              for (int fj = 0; fj < f; ++fj) {
                const std::ptrdiff_t idx =
                    base + (static_cast<std::ptrdiff_t>(oy * s + fi) * d.w + (ox * s + fj)) * d.c + c;
                xn.grad[static_cast<std::size_t>(idx)] += g;
              }
            }
          }
        }
      }
    }
  };
  Tensor out = make_op_node(out_shape, {input}, backward);
  const auto& xv = input.node()->values;
  auto& yv = out.node()->values;
  std::size_t oi = 0;
  for (int n = 0; n < d.n; ++n) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(n) * d.h * d.w * d.c;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int c = 0; c < d.c; ++c) {
          double acc = 0.0;
          for (int fi = 0; fi < f; ++fi) {
            for (int fj = 0; fj < f; ++fj) {
              const std::ptrdiff_t idx =
                  base + (static_cast<std::ptrdiff_t>(oy * s + fi) * d.w + (ox * s + fj)) * d.c + c;
              acc += xv[static_cast<std::size_t>(idx)];
            }
          }
          yv[oi++] = acc * inv;
        }
      }
    }
  }
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias, ActKind activation) {
  const Shape& ws = weights.shape();
  if (ws.size() != 2) throw DimensionError("dense weights must be (out, in)");
  const int out_n = ws[0];
  const int in_n = ws[1];
  if (bias.shape() != Shape{out_n}) throw DimensionError("dense bias must be (out)");
  const Shape& is = input.shape();
  const bool batched = is.size() == 2;
  if (!batched && is.size() != 1) throw DimensionError("dense input must be (n) or (N, n)");
  const int n = batched ? is[0] : 1;
  const int in_len = batched ? is[1] : is[0];
  if (in_len != in_n) {
    throw DimensionError("dense input length " + std::to_string(in_len) + " does not match weights in dim " +
                         std::to_string(in_n));
  }
  const Shape out_shape = batched ? Shape{n, out_n} : Shape{out_n};

  auto backward = [n, in_n, out_n](detail::TensorNode& self) {
    auto& an = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    ConstMapMat dym(self.grad.data(), n, out_n);
    if (wn.requires_grad) {
      wn.ensure_grad();
      ConstMapMat am(an.values.data(), n, in_n);
      MapMat dwm(wn.grad.data(), out_n, in_n);
      dwm.noalias() += dym.transpose() * am;
    }
    if (bn.requires_grad) {
      bn.ensure_grad();
      Eigen::Map<Eigen::VectorXd> dbv(bn.grad.data(), out_n);
      dbv.noalias() += dym.colwise().sum().transpose();
    }
    if (an.requires_grad) {
      an.ensure_grad();
      ConstMapMat wm(wn.values.data(), out_n, in_n);
      MapMat dam(an.grad.data(), n, in_n);
      dam.noalias() += dym * wm;
    }
  };

  Tensor out = make_op_node(out_shape, {input, weights, bias}, backward);
  ConstMapMat am(input.node()->values.data(), n, in_n);
  ConstMapMat wm(weights.node()->values.data(), out_n, in_n);
  Eigen::Map<const Eigen::VectorXd> bv(bias.node()->values.data(), out_n);
  MapMat ym(out.node()->values.data(), n, out_n);
  ym.noalias() = am * wm.transpose();
  ym.rowwise() += bv.transpose();
  return activate(out, activation);
}

namespace {

Tensor elementwise_unary(const Tensor& input, const std::function<double(double)>& fwd,
                         const std::function<double(double, double)>& dfn) {
  // dfn(x, y) is the local derivative given input x and output y.
  auto backward = [dfn](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      xn.grad[i] += self.grad[i] * dfn(xn.values[i], self.values[i]);
    }
  };
  Tensor out = make_op_node(input.shape(), {input}, backward);
  const auto& xv = input.node()->values;
  auto& yv = out.node()->values;
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] = fwd(xv[i]);
  return out;
}

}  // namespace

Tensor relu(const Tensor& input) {
  return elementwise_unary(
      input, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& input, double alpha) {
  return elementwise_unary(
      input, [alpha](double x) { return x > 0.0 ? x : alpha * x; },
      [alpha](double x, double) { return x > 0.0 ? 1.0 : alpha; });
}

Tensor sigmoid(const Tensor& input) {
  return elementwise_unary(
      input, [](double x) { return sigmoid_scalar(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softmax(const Tensor& input) {
  const Shape& s = input.shape();
  if (s.empty()) throw DimensionError("softmax needs at least one axis");
  const int cols = s.back();
  const int rows = input.numel() / cols;
  auto backward = [rows, cols](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (int r = 0; r < rows; ++r) {
      const double* p = self.values.data() + static_cast<std::ptrdiff_t>(r) * cols;
      const double* g = self.grad.data() + static_cast<std::ptrdiff_t>(r) * cols;
      double* dx = xn.grad.data() + static_cast<std::ptrdiff_t>(r) * cols;
      double dot = 0.0;
      for (int i = 0; i < cols; ++i) dot += g[i] * p[i];
      for (int i = 0; i < cols; ++i) dx[i] += p[i] * (g[i] - dot);
    }
  };
  Tensor out = make_op_node(input.shape(), {input}, backward);
  const auto& xv = input.node()->values;
  auto& yv = out.node()->values;
  for (int r = 0; r < rows; ++r) {
    softmax_row(xv.data() + static_cast<std::ptrdiff_t>(r) * cols,
                yv.data() + static_cast<std::ptrdiff_t>(r) * cols, cols);
  }
  return out;
}

Tensor activate(const Tensor& input, ActKind kind) {
  switch (kind) {
    case ActKind::kIdentity:
      return input;
    case ActKind::kRelu:
      return relu(input);
    case ActKind::kLeakyRelu:
      return leaky_relu(input);
    case ActKind::kSigmoid:
      return sigmoid(input);
    case ActKind::kSoftmax:
      return softmax(input);
  }
  throw ConfigError("unknown activation kind");
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  auto backward = [](detail::TensorNode& self) {
    for (const auto& pn : self.parents) {
      if (!pn->requires_grad) continue;
      pn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pn->grad[i] += self.grad[i];
    }
  };
  Tensor out = make_op_node(a.shape(), {a, b}, backward);
  const auto& av = a.node()->values;
  const auto& bv = b.node()->values;
  auto& yv = out.node()->values;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] + bv[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  auto backward = [](detail::TensorNode& self) {
    auto& an = *self.parents[0];
    auto& bn = *self.parents[1];
    if (an.requires_grad) {
      an.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an.grad[i] += self.grad[i] * bn.values[i];
    }
    if (bn.requires_grad) {
      bn.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn.grad[i] += self.grad[i] * an.values[i];
    }
  };
  Tensor out = make_op_node(a.shape(), {a, b}, backward);
  const auto& av = a.node()->values;
  const auto& bv = b.node()->values;
  auto& yv = out.node()->values;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * bv[i];
  return out;
}

Tensor mul_scalar(const Tensor& a, double c) {
  auto backward = [c](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i] * c;
  };
  Tensor out = make_op_node(a.shape(), {a}, backward);
  const auto& av = a.node()->values;
  auto& yv = out.node()->values;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] * c;
  return out;
}

Tensor sum(const Tensor& a) {
  auto backward = [](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    const double g = self.grad[0];
    for (auto& v : xn.grad) v += g;
  };
  Tensor out = make_op_node({1}, {a}, backward);
  double acc = 0.0;
  for (double v : a.node()->values) acc += v;
  out.node()->values[0] = acc;
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw ConfigError("concat_channels needs at least one input");
  const Shape& first = inputs[0].shape();
  if (first.empty()) throw DimensionError("concat_channels inputs need a channel axis");
  Shape lead(first.begin(), first.end() - 1);
  int total_c = 0;
  std::vector<int> widths;
  for (const auto& t : inputs) {
    const Shape& s = t.shape();
    if (Shape(s.begin(), s.end() - 1) != lead) {
      throw GeometryError("concat_channels branch dims mismatch: " + shape_str(first) + " vs " +
                          shape_str(s));
    }
    widths.push_back(s.back());
    total_c += s.back();
  }
  Shape out_shape = lead;
  out_shape.push_back(total_c);
  int rows = 1;
  for (int d : lead) rows *= d;

  auto backward = [rows, widths, total_c](detail::TensorNode& self) {
    int offset = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& pn = *self.parents[k];
      const int w = widths[k];
      if (pn.requires_grad) {
        pn.ensure_grad();
        for (int r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + static_cast<std::ptrdiff_t>(r) * total_c + offset;
          double* dst = pn.grad.data() + static_cast<std::ptrdiff_t>(r) * w;
          for (int i = 0; i < w; ++i) dst[i] += g[i];
        }
      }
      offset += w;
    }
  };
  Tensor out = make_op_node(out_shape, inputs, backward);
  auto& yv = out.node()->values;
  int offset = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto& xv = inputs[k].node()->values;
    const int w = widths[k];
    for (int r = 0; r < rows; ++r) {
      std::memcpy(yv.data() + static_cast<std::ptrdiff_t>(r) * total_c + offset,
                  xv.data() + static_cast<std::ptrdiff_t>(r) * w, sizeof(double) * static_cast<std::size_t>(w));
    }
    offset += w;
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape from " + shape_str(a.shape()) + " to " + shape_str(shape) +
                         " changes element count");
  }
  auto backward = [](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i];
  };
  Tensor out = make_op_node(std::move(shape), {a}, backward);
  out.node()->values = a.node()->values;
  return out;
}

Tensor global_max_pool(const Tensor& input) {
  const SpatialDims d = spatial_dims(input, "global_max_pool");
  const Shape out_shape = d.batched ? Shape{d.n, d.c} : Shape{d.c};
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(d.n) * d.c);
  auto backward = [argmax](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      xn.grad[static_cast<std::size_t>((*argmax)[i])] += self.grad[i];
    }
  };
  Tensor out = make_op_node(out_shape, {input}, backward);
  const auto& xv = input.node()->values;
  auto& yv = out.node()->values;
  for (int n = 0; n < d.n; ++n) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(n) * d.h * d.w * d.c;
    for (int c = 0; c < d.c; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      std::ptrdiff_t best_idx = base + c;
      for (int i = 0; i < d.h * d.w; ++i) {
        const std::ptrdiff_t idx = base + static_cast<std::ptrdiff_t>(i) * d.c + c;
        if (xv[static_cast<std::size_t>(idx)] > best) {
          best = xv[static_cast<std::size_t>(idx)];
          best_idx = idx;
        }
      }
      yv[static_cast<std::size_t>(n) * d.c + c] = best;
      (*argmax)[static_cast<std::size_t>(n) * d.c + c] = static_cast<int>(best_idx);
    }
  }
  return out;
}

Tensor dropout(const Tensor& input, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return input;
  auto mask = std::make_shared<std::vector<double>>(input.node()->values.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : *mask) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  auto backward = [mask](detail::TensorNode& self) {
    auto& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i] * (*mask)[i];
  };
  Tensor out = make_op_node(input.shape(), {input}, backward);
  const auto& xv = input.node()->values;
  auto& yv = out.node()->values;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] * (*mask)[i];
  return out;
}

void LossConfig::validate(int num_classes) const {
  if (batch_size <= 0) throw ConfigError("loss batch size must be positive");
  if (static_cast<int>(class_weights.size()) != num_classes) {
    throw ConfigError("class_weights length " + std::to_string(class_weights.size()) +
                      " does not match " + std::to_string(num_classes) + " classes");
  }
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ConfigError("class weights must be positive");
  }
}

Tensor weighted_cross_entropy(const Tensor& pred, const Tensor& target,
                              const std::vector<double>& class_weights) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("loss pred/target shape mismatch: " + shape_str(pred.shape()) + " vs " +
                         shape_str(target.shape()));
  }
  const Shape& s = pred.shape();
  if (s.empty() || s.size() > 2) throw DimensionError("cross entropy expects (C) or (N, C)");
  const int c = s.back();
  const int m = pred.numel() / c;
  if (static_cast<int>(class_weights.size()) != c) {
    throw ConfigError("class_weights length must equal the number of classes");
  }
  for (double w : class_weights) {
    if (!(w > 0.0)) throw ConfigError("class weights must be positive");
  }
  auto weights = std::make_shared<std::vector<double>>(class_weights);
  auto backward = [weights, c, m](detail::TensorNode& self) {
    auto& pn = *self.parents[0];
    if (!pn.requires_grad) return;
    pn.ensure_grad();
    const auto& tn = *self.parents[1];
    const double g = self.grad[0] / m;
    for (int r = 0; r < m; ++r) {
      for (int i = 0; i < c; ++i) {
        const std::size_t idx = static_cast<std::size_t>(r) * c + i;
        const double y = tn.values[idx];
        if (y == 0.0) continue;
        pn.grad[idx] += -g * (*weights)[static_cast<std::size_t>(i)] * y / pn.values[idx];
      }
    }
  };
  Tensor out = make_op_node({1}, {pred, target}, backward);
  const auto& pv = pred.node()->values;
  const auto& tv = target.node()->values;
  double acc = 0.0;
  for (int r = 0; r < m; ++r) {
    for (int i = 0; i < c; ++i) {
      const std::size_t idx = static_cast<std::size_t>(r) * c + i;
      if (tv[idx] == 0.0) continue;
      acc += -class_weights[static_cast<std::size_t>(i)] * tv[idx] * std::log(pv[idx]);
    }
  }
  out.node()->values[0] = acc / m;
  return out;
}

Tensor yolo_loss(const Tensor& pred, const Tensor& target, int anchors_per_cell, int num_classes,
                 const std::vector<double>& class_weights, const YoloLossWeights& weights) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("yolo_loss pred/target shape mismatch");
  }
  const Shape& s = pred.shape();
  if (s.size() != 3 && s.size() != 4) throw DimensionError("yolo_loss expects (S,S,D) or (N,S,S,D)");
  const int depth = s.back();
  const int slot = 5 + num_classes;
  if (depth != anchors_per_cell * slot) {
    throw DimensionError("yolo_loss depth " + std::to_string(depth) + " != A*(5+C) = " +
                         std::to_string(anchors_per_cell * slot));
  }
  std::vector<double> cw = class_weights;
  if (cw.empty()) cw.assign(static_cast<std::size_t>(num_classes), 1.0);
  if (static_cast<int>(cw.size()) != num_classes) {
    throw ConfigError("yolo_loss class_weights length must equal num_classes");
  }
  for (double w : cw) {
    if (!(w > 0.0)) throw ConfigError("class weights must be positive");
  }
  const int m = s.size() == 4 ? s[0] : 1;
  const int total_slots = pred.numel() / slot;
  const int c = num_classes;

  auto wshared = std::make_shared<std::vector<double>>(std::move(cw));
  const YoloLossWeights lw = weights;
  auto backward = [wshared, total_slots, slot, c, m, lw](detail::TensorNode& self) {
    auto& pn = *self.parents[0];
    if (!pn.requires_grad) return;
    pn.ensure_grad();
    const auto& tn = *self.parents[1];
    const double g = self.grad[0] / m;
    std::vector<double> probs(static_cast<std::size_t>(c));
    for (int k = 0; k < total_slots; ++k) {
      const double* p = pn.values.data() + static_cast<std::ptrdiff_t>(k) * slot;
      const double* t = tn.values.data() + static_cast<std::ptrdiff_t>(k) * slot;
      double* dp = pn.grad.data() + static_cast<std::ptrdiff_t>(k) * slot;
      const double obj = t[4];
      const double so = sigmoid_scalar(p[4]);
      dp[4] += g * lw.obj * (so - obj);
      if (obj > 0.5) {
        const double sx = sigmoid_scalar(p[0]);
        const double sy = sigmoid_scalar(p[1]);
        dp[0] += g * lw.coord * 2.0 * (sx - t[0]) * sx * (1.0 - sx);
        dp[1] += g * lw.coord * 2.0 * (sy - t[1]) * sy * (1.0 - sy);
        dp[2] += g * lw.coord * 2.0 * (p[2] - t[2]);
        dp[3] += g * lw.coord * 2.0 * (p[3] - t[3]);
        softmax_row(p + 5, probs.data(), c);
        double wsum = 0.0;
        for (int i = 0; i < c; ++i) wsum += (*wshared)[static_cast<std::size_t>(i)] * t[5 + i];
        for (int i = 0; i < c; ++i) {
          dp[5 + i] += g * lw.cls *
                       (wsum * probs[static_cast<std::size_t>(i)] -
                        (*wshared)[static_cast<std::size_t>(i)] * t[5 + i]);
        }
      }
    }
  };

  Tensor out = make_op_node({1}, {pred, target}, backward);
  const auto& pv = pred.node()->values;
  const auto& tv = target.node()->values;
  std::vector<double> probs(static_cast<std::size_t>(c));
  double acc = 0.0;
  for (int k = 0; k < total_slots; ++k) {
    const double* p = pv.data() + static_cast<std::ptrdiff_t>(k) * slot;
    const double* t = tv.data() + static_cast<std::ptrdiff_t>(k) * slot;
    const double obj = t[4];
    // Stable BCE from the raw logit.
    acc += lw.obj * (softplus(p[4]) - p[4] * obj);
    if (obj > 0.5) {
      const double sx = sigmoid_scalar(p[0]);
      const double sy = sigmoid_scalar(p[1]);
      const double dx = sx - t[0];
      const double dy = sy - t[1];
      const double dw = p[2] - t[2];
      const double dh = p[3] - t[3];
      acc += lw.coord * (dx * dx + dy * dy + dw * dw + dh * dh);
      softmax_row(p + 5, probs.data(), c);
      for (int i = 0; i < c; ++i) {
        if (t[5 + i] == 0.0) continue;
        acc += -lw.cls * (*wshared)[static_cast<std::size_t>(i)] * t[5 + i] *
               std::log(probs[static_cast<std::size_t>(i)]);
      }
    }
  }
  out.node()->values[0] = acc / m;
  return out;
}

Tensor loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg) {
  const int c = static_cast<int>(cfg.class_weights.size());
  cfg.validate(c);
  if (cfg.kind == LossKind::kWeightedCrossEntropy) {
    return weighted_cross_entropy(pred, target, cfg.class_weights);
  }
  const int depth = pred.shape().back();
  const int slot = 5 + c;
  if (depth % slot != 0) {
    throw DimensionError("yolo output depth " + std::to_string(depth) +
                         " is not a multiple of 5+C for C = " + std::to_string(c));
  }
  return yolo_loss(pred, target, depth / slot, c, cfg.class_weights);
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw ContractError("grad_check step must be positive");
  std::vector<double> base(x.values().begin(), x.values().end());
  Tensor xg = Tensor::from_data(x.shape(), base, /*requires_grad=*/true);
  Tensor out = f(xg);
  if (out.numel() != 1) throw ContractError("grad_check requires a scalar-valued function");

  std::vector<double> analytic(base.size(), 0.0);
  if (!out.is_leaf() && out.requires_grad()) {
    out.backward();
    const auto g = xg.grad();
    if (!g.empty()) analytic.assign(g.begin(), g.end());
  }

  double max_err = 0.0;
  std::vector<double> work = base;
  for (std::size_t i = 0; i < base.size(); ++i) {
    work[i] = base[i] + h;
    const double fp = f(Tensor::from_data(x.shape(), work)).item();
    work[i] = base[i] - h;
    const double fm = f(Tensor::from_data(x.shape(), work)).item();
    work[i] = base[i];
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
    max_err = std::max(max_err, std::abs(analytic[i] - numeric) / denom);
  }
  return max_err;
}

}  // namespace gocard
