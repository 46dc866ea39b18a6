/*
 * Copyright 2026 The mdunet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tensor/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>

namespace mdu {

std::string shape_string(const Shape& shape, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(shape[i]);
  }
  return out;
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kVariable: return "variable";
    case OpKind::kParameter: return "parameter";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kMaxPool2d: return "maxpool2d";
    case OpKind::kAvgPool2d: return "avgpool2d";
    case OpKind::kUpsample2x: return "upsample2x";
    case OpKind::kConcat: return "concat";
    case OpKind::kSliceChannels: return "slice_channels";
    case OpKind::kAdd: return "add";
    case OpKind::kRelu: return "relu";
    case OpKind::kSoftmaxChannels: return "softmax_channels";
    case OpKind::kBatchNorm2d: return "batchnorm2d";
    case OpKind::kSum: return "sum";
    case OpKind::kWeightedSum: return "weighted_sum";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kSoftDice: return "soft_dice";
  }
  return "unknown";
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

void require_rank4(const Shape& s, std::string_view op) {
  if (s.size() != 4) {
    throw ShapeError(std::string(op) + " expects a B×C×H×W tensor, got " +
                     shape_string(s));
  }
}

struct ConvGeometry {
  std::ptrdiff_t batch, in_ch, height, width, out_ch, kh, kw, dh, dw, ph, pw;

  std::ptrdiff_t patch() const { return in_ch * kh * kw; }
  std::ptrdiff_t pixels() const { return height * width; }
  bool pointwise() const { return kh == 1 && kw == 1; }
};

// Unrolls one C×H×W image into a (C·kh·kw)×(H·W) patch matrix.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  for (std::ptrdiff_t c = 0; c < g.in_ch; ++c) {
    const T* plane = image + c * g.pixels();
    for (std::ptrdiff_t i = 0; i < g.kh; ++i) {
      for (std::ptrdiff_t j = 0; j < g.kw; ++j) {
        T* row = cols + ((c * g.kh + i) * g.kw + j) * g.pixels();
        const std::ptrdiff_t oy = i * g.dh - g.ph;
        const std::ptrdiff_t ox = j * g.dw - g.pw;
        for (std::ptrdiff_t y = 0; y < g.height; ++y) {
          const std::ptrdiff_t iy = y + oy;
          T* dst = row + y * g.width;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.width, T{0});
            continue;
          }
          const T* src = plane + iy * g.width;
          for (std::ptrdiff_t x = 0; x < g.width; ++x) {
            const std::ptrdiff_t ix = x + ox;
            dst[x] = (ix >= 0 && ix < g.width) ? src[ix] : T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch-matrix entries back onto the image.
template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
  for (std::ptrdiff_t c = 0; c < g.in_ch; ++c) {
    T* plane = image + c * g.pixels();
    for (std::ptrdiff_t i = 0; i < g.kh; ++i) {
      for (std::ptrdiff_t j = 0; j < g.kw; ++j) {
        const T* row = cols + ((c * g.kh + i) * g.kw + j) * g.pixels();
        const std::ptrdiff_t oy = i * g.dh - g.ph;
        const std::ptrdiff_t ox = j * g.dw - g.pw;
        for (std::ptrdiff_t y = 0; y < g.height; ++y) {
          const std::ptrdiff_t iy = y + oy;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + y * g.width;
          T* dst = plane + iy * g.width;
          for (std::ptrdiff_t x = 0; x < g.width; ++x) {
            const std::ptrdiff_t ix = x + ox;
            if (ix >= 0 && ix < g.width) dst[ix] += src[x];
          }
        }
      }
    }
  }
}

void check_kernel_axis(std::size_t extent, const Shape& kshape) {
  if (extent != 1 && extent % 2 == 0) {
    throw ShapeError("conv2d kernel " + shape_string(kshape) +
                     " has an even spatial extent; same padding needs odd "
                     "extents (or 1 for asymmetric kernels)");
  }
}

template <typename T>
void check_simplex(const Tensor<T>& probs, std::string_view op) {
  require_rank4(probs.shape(), op);
  const std::size_t b = probs.dim(0), c = probs.dim(1);
  const std::size_t hw = probs.dim(2) * probs.dim(3);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t p = 0; p < hw; ++p) {
      double s = 0;
      for (std::size_t k = 0; k < c; ++k) s += probs[(n * c + k) * hw + p];
      if (!(std::abs(s - 1.0) <= kSimplexTolerance)) {
        std::ostringstream msg;
        msg << op << " expects per-pixel probabilities; channel sum " << s
            << " at batch " << n << " pixel " << p << " deviates from 1";
        throw ValueError(msg.str());
      }
    }
  }
}

template <typename T>
void check_target(const Tensor<T>& probs, const Tensor<T>& target,
                  std::string_view op) {
  const Shape want{probs.dim(0), probs.dim(2), probs.dim(3)};
  if (target.shape() != want) {
    throw ShapeError(std::string(op) + " target shape " +
                     shape_string(target.shape()) + " does not match " +
                     shape_string(want));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    const T t = target[i];
    if (t < 0 || t >= T(probs.dim(1)) || t != std::floor(t)) {
      throw ValueError(std::string(op) + " target holds non-class value " +
                       std::to_string(double(t)));
    }
  }
}

}  // namespace

template <typename T>
Var Graph<T>::push(OpKind kind, std::vector<std::size_t> inputs,
                   Tensor<T> value,
                   std::function<void(Graph&, std::size_t)> backward) {
  Node node;
  node.kind = kind;
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                   [&](std::size_t i) { return needs_grad(i); });
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape(), T{0});
  return n.grad;
}

template <typename T>
Tensor<T> Graph<T>::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Tensor<T>(n.value.shape(), T{0});
  return n.grad;
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  return push(OpKind::kConstant, {}, std::move(value), nullptr);
}

template <typename T>
Var Graph<T>::variable(Tensor<T> value) {
  Var v = push(OpKind::kVariable, {}, std::move(value), nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

template <typename T>
Var Graph<T>::parameter(Parameter<T>& param) {
  Parameter<T>* p = &param;
  Var v = push(OpKind::kParameter, {}, param.value,
               [p](Graph& g, std::size_t self) {
                 const Tensor<T>& gr = g.nodes_[self].grad;
                 for (std::size_t i = 0; i < gr.size(); ++i) p->grad[i] += gr[i];
               });
  nodes_[v.id].requires_grad = true;
  return v;
}

template <typename T>
Var Graph<T>::conv2d(Var x, Var kernel, std::optional<Var> bias,
                     Dilation dilation) {
  const Shape& xs = value(x).shape();
  const Shape& ks = value(kernel).shape();
  require_rank4(xs, "conv2d");
  if (ks.size() != 4) {
    throw ShapeError("conv2d kernel must be Cout×Cin×kh×kw, got " +
                     shape_string(ks));
  }
  if (xs[1] != ks[1]) {
    throw ShapeError("conv2d input " + shape_string(xs) + " has " +
                     std::to_string(xs[1]) + " channels but kernel " +
                     shape_string(ks) + " expects " + std::to_string(ks[1]));
  }
  check_kernel_axis(ks[2], ks);
  check_kernel_axis(ks[3], ks);
  if (dilation.h < 1 || dilation.w < 1) {
    throw ShapeError("conv2d dilation must be >= 1");
  }
  if (bias && value(*bias).shape() != Shape{ks[0]}) {
    throw ShapeError("conv2d bias " + shape_string(value(*bias).shape()) +
                     " does not match kernel " + shape_string(ks));
  }

  const auto sz = [](std::size_t v) { return static_cast<std::ptrdiff_t>(v); };
  ConvGeometry geo{sz(xs[0]),
                   sz(xs[1]),
                   sz(xs[2]),
                   sz(xs[3]),
                   sz(ks[0]),
                   sz(ks[2]),
                   sz(ks[3]),
                   sz(dilation.h),
                   sz(dilation.w),
                   sz((ks[2] - 1) * dilation.h / 2),
                   sz((ks[3] - 1) * dilation.w / 2)};

  Tensor<T> out(Shape{xs[0], ks[0], xs[2], xs[3]});
  const Tensor<T>& input = value(x);
  ConstMatMap<T> wmat(value(kernel).raw(), geo.out_ch, geo.patch());
  std::vector<T> cols(geo.pointwise() ? 0 : geo.patch() * geo.pixels());
  for (std::ptrdiff_t b = 0; b < geo.batch; ++b) {
    const T* img = input.raw() + b * geo.in_ch * geo.pixels();
    const T* colp = img;
    if (!geo.pointwise()) {
      im2col(img, geo, cols.data());
      colp = cols.data();
    }
    ConstMatMap<T> cmat(colp, geo.patch(), geo.pixels());
    MatMap<T> omat(out.raw() + b * geo.out_ch * geo.pixels(), geo.out_ch,
                   geo.pixels());
    omat.noalias() = wmat * cmat;
    if (bias) {
      const Tensor<T>& bv = value(*bias);
      for (std::ptrdiff_t o = 0; o < geo.out_ch; ++o) omat.row(o).array() += bv[o];
    }
  }

  std::vector<std::size_t> inputs{x.id, kernel.id};
  if (bias) inputs.push_back(bias->id);
  return push(
      OpKind::kConv2d, std::move(inputs), std::move(out),
      [geo](Graph& g, std::size_t self) {
        const Node& n = g.nodes_[self];
        const std::size_t xi = n.inputs[0], ki = n.inputs[1];
        const bool has_bias = n.inputs.size() > 2;
        const bool want_x = g.needs_grad(xi);
        const bool want_k = g.needs_grad(ki);
        const bool want_b = has_bias && g.needs_grad(n.inputs[2]);
        const Tensor<T>& input = g.nodes_[xi].value;
        ConstMatMap<T> wmat(g.nodes_[ki].value.raw(), geo.out_ch, geo.patch());
        T* dx = want_x ? g.grad_buffer(xi).raw() : nullptr;
        T* dk = want_k ? g.grad_buffer(ki).raw() : nullptr;
        T* db = want_b ? g.grad_buffer(n.inputs[2]).raw() : nullptr;
        std::vector<T> cols(geo.pointwise() ? 0 : geo.patch() * geo.pixels());
        std::vector<T> dcols(geo.pointwise() || !want_x ? 0
                                                        : geo.patch() * geo.pixels());
        for (std::ptrdiff_t b = 0; b < geo.batch; ++b) {
          ConstMatMap<T> dout(n.grad.raw() + b * geo.out_ch * geo.pixels(),
                              geo.out_ch, geo.pixels());
          if (want_b) {
            for (std::ptrdiff_t o = 0; o < geo.out_ch; ++o) db[o] += dout.row(o).sum();
          }
          const T* img = input.raw() + b * geo.in_ch * geo.pixels();
          if (want_k) {
            const T* colp = img;
            if (!geo.pointwise()) {
              im2col(img, geo, cols.data());
              colp = cols.data();
            }
            ConstMatMap<T> cmat(colp, geo.patch(), geo.pixels());
            MatMap<T> dkmat(dk, geo.out_ch, geo.patch());
            dkmat.noalias() += dout * cmat.transpose();
          }
          if (want_x) {
            T* dimg = dx + b * geo.in_ch * geo.pixels();
            if (geo.pointwise()) {
              MatMap<T> dmat(dimg, geo.in_ch, geo.pixels());
              dmat.noalias() += wmat.transpose() * dout;
            } else {
              MatMap<T> dmat(dcols.data(), geo.patch(), geo.pixels());
              dmat.noalias() = wmat.transpose() * dout;
              col2im_add(dcols.data(), geo, dimg);
            }
          }
        }
      });
}

namespace {

template <typename T>
Shape pooled_shape(const Shape& s, std::string_view op) {
  require_rank4(s, op);
  if (s[2] % 2 || s[3] % 2) {
    throw ShapeError(std::string(op) + " needs even spatial extents, got " +
                     shape_string(s));
  }
  return Shape{s[0], s[1], s[2] / 2, s[3] / 2};
}

}  // namespace

template <typename T>
Var Graph<T>::maxpool2d(Var x) {
  const Tensor<T>& in = value(x);
  Tensor<T> out(pooled_shape<T>(in.shape(), "maxpool2d"));
  const std::size_t planes = in.dim(0) * in.dim(1);
  const std::size_t h = in.dim(2), w = in.dim(3), oh = h / 2, ow = w / 2;
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        // Row-major scan with strict '>' keeps the first maximum on ties.
        std::size_t best = p * h * w + (2 * y) * w + 2 * xo;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = p * h * w + (2 * y + dy) * w + 2 * xo + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = p * oh * ow + y * ow + xo;
        out[o] = in[best];
        argmax[o] = best;
      }
    }
  }
  return push(OpKind::kMaxPool2d, {x.id}, std::move(out),
              [argmax = std::move(argmax)](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dx = g.grad_buffer(n.inputs[0]);
                for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += n.grad[o];
              });
}

template <typename T>
Var Graph<T>::avgpool2d(Var x) {
  const Tensor<T>& in = value(x);
  Tensor<T> out(pooled_shape<T>(in.shape(), "avgpool2d"));
  const std::size_t planes = in.dim(0) * in.dim(1);
  const std::size_t h = in.dim(2), w = in.dim(3), oh = h / 2, ow = w / 2;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = in.raw() + p * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        out[p * oh * ow + y * ow + xo] =
            T(0.25) * (src[2 * y * w + 2 * xo] + src[2 * y * w + 2 * xo + 1] +
                       src[(2 * y + 1) * w + 2 * xo] +
                       src[(2 * y + 1) * w + 2 * xo + 1]);
      }
    }
  }
  return push(OpKind::kAvgPool2d, {x.id}, std::move(out),
              [planes, h, w](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dx = g.grad_buffer(n.inputs[0]);
                const std::size_t oh = h / 2, ow = w / 2;
                for (std::size_t p = 0; p < planes; ++p) {
                  for (std::size_t y = 0; y < h; ++y) {
                    for (std::size_t xi = 0; xi < w; ++xi) {
                      dx[p * h * w + y * w + xi] +=
                          T(0.25) * n.grad[p * oh * ow + (y / 2) * ow + xi / 2];
                    }
                  }
                }
              });
}

template <typename T>
Var Graph<T>::upsample2x(Var x) {
  const Tensor<T>& in = value(x);
  require_rank4(in.shape(), "upsample2x");
  const std::size_t planes = in.dim(0) * in.dim(1);
  const std::size_t h = in.dim(2), w = in.dim(3);
  Tensor<T> out(Shape{in.dim(0), in.dim(1), 2 * h, 2 * w});
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xo = 0; xo < 2 * w; ++xo) {
        out[p * 4 * h * w + y * 2 * w + xo] = in[p * h * w + (y / 2) * w + xo / 2];
      }
    }
  }
  return push(OpKind::kUpsample2x, {x.id}, std::move(out),
              [planes, h, w](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dx = g.grad_buffer(n.inputs[0]);
                for (std::size_t p = 0; p < planes; ++p) {
                  for (std::size_t y = 0; y < 2 * h; ++y) {
                    for (std::size_t xo = 0; xo < 2 * w; ++xo) {
                      dx[p * h * w + (y / 2) * w + xo / 2] +=
                          n.grad[p * 4 * h * w + y * 2 * w + xo];
                    }
                  }
                }
              });
}

template <typename T>
Var Graph<T>::concat(std::span<const Var> inputs) {
  if (inputs.empty()) throw ShapeError("concat needs at least one input");
  const Shape& first = value(inputs[0]).shape();
  require_rank4(first, "concat");
  std::size_t channels = 0;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Shape& s = value(inputs[i]).shape();
    if (s.size() != 4 || s[0] != first[0] || s[2] != first[2] || s[3] != first[3]) {
      throw ShapeError("concat input " + std::to_string(i) + " has shape " +
                       shape_string(s) + ", incompatible with input 0 shape " +
                       shape_string(first));
    }
    channels += s[1];
    ids.push_back(inputs[i].id);
  }
  const std::size_t batch = first[0], hw = first[2] * first[3];
  Tensor<T> out(Shape{batch, channels, first[2], first[3]});
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t offset = 0;
    for (const Var& v : inputs) {
      const Tensor<T>& t = value(v);
      const std::size_t c = t.dim(1);
      std::copy_n(t.raw() + b * c * hw, c * hw,
                  out.raw() + (b * channels + offset) * hw);
      offset += c;
    }
  }
  return push(OpKind::kConcat, std::move(ids), std::move(out),
              [batch, channels, hw](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                std::size_t offset = 0;
                for (std::size_t in : n.inputs) {
                  const std::size_t c = g.nodes_[in].value.dim(1);
                  if (g.needs_grad(in)) {
                    Tensor<T>& dx = g.grad_buffer(in);
                    for (std::size_t b = 0; b < batch; ++b) {
                      const T* src = n.grad.raw() + (b * channels + offset) * hw;
                      T* dst = dx.raw() + b * c * hw;
                      for (std::size_t i = 0; i < c * hw; ++i) dst[i] += src[i];
                    }
                  }
                  offset += c;
                }
              });
}

template <typename T>
Var Graph<T>::slice_channels(Var x, std::size_t begin, std::size_t count) {
  const Tensor<T>& in = value(x);
  require_rank4(in.shape(), "slice_channels");
  if (count == 0 || begin + count > in.dim(1)) {
    throw ShapeError("slice_channels [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     shape_string(in.shape()));
  }
  const std::size_t batch = in.dim(0), channels = in.dim(1);
  const std::size_t hw = in.dim(2) * in.dim(3);
  Tensor<T> out(Shape{batch, count, in.dim(2), in.dim(3)});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(in.raw() + (b * channels + begin) * hw, count * hw,
                out.raw() + b * count * hw);
  }
  return push(OpKind::kSliceChannels, {x.id}, std::move(out),
              [=](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dx = g.grad_buffer(n.inputs[0]);
                for (std::size_t b = 0; b < batch; ++b) {
                  const T* src = n.grad.raw() + b * count * hw;
                  T* dst = dx.raw() + (b * channels + begin) * hw;
                  for (std::size_t i = 0; i < count * hw; ++i) dst[i] += src[i];
                }
              });
}

template <typename T>
Var Graph<T>::add(std::span<const Var> inputs) {
  if (inputs.empty()) throw ShapeError("add needs at least one input");
  const Shape& first = value(inputs[0]).shape();
  Tensor<T> out = value(inputs[0]);
  std::vector<std::size_t> ids{inputs[0].id};
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    const Tensor<T>& t = value(inputs[i]);
    if (t.shape() != first) {
      throw ShapeError("add input " + std::to_string(i) + " has shape " +
                       shape_string(t.shape()) + ", expected " +
                       shape_string(first));
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += t[k];
    ids.push_back(inputs[i].id);
  }
  return push(OpKind::kAdd, std::move(ids), std::move(out),
              [](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                for (std::size_t in : n.inputs) {
                  if (!g.needs_grad(in)) continue;
                  Tensor<T>& dx = g.grad_buffer(in);
                  for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += n.grad[k];
                }
              });
}

template <typename T>
Var Graph<T>::relu(Var x) {
  Tensor<T> out = value(x);
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return push(OpKind::kRelu, {x.id}, std::move(out),
              [](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dx = g.grad_buffer(n.inputs[0]);
                for (std::size_t k = 0; k < dx.size(); ++k) {
                  if (n.value[k] > T{0}) dx[k] += n.grad[k];
                }
              });
}

template <typename T>
Var Graph<T>::softmax_channels(Var x) {
  const Tensor<T>& in = value(x);
  require_rank4(in.shape(), "softmax_channels");
  const std::size_t batch = in.dim(0), c = in.dim(1);
  const std::size_t hw = in.dim(2) * in.dim(3);
  Tensor<T> out(in.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const T* src = in.raw() + b * c * hw;
    T* dst = out.raw() + b * c * hw;
    for (std::size_t p = 0; p < hw; ++p) {
      T mx = src[p];
      for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, src[k * hw + p]);
      T total{0};
      for (std::size_t k = 0; k < c; ++k) {
        dst[k * hw + p] = std::exp(src[k * hw + p] - mx);
        total += dst[k * hw + p];
      }
      for (std::size_t k = 0; k < c; ++k) dst[k * hw + p] /= total;
    }
  }
  return push(OpKind::kSoftmaxChannels, {x.id}, std::move(out),
              [batch, c, hw](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dx = g.grad_buffer(n.inputs[0]);
                for (std::size_t b = 0; b < batch; ++b) {
                  const T* y = n.value.raw() + b * c * hw;
                  const T* dy = n.grad.raw() + b * c * hw;
                  T* d = dx.raw() + b * c * hw;
                  for (std::size_t p = 0; p < hw; ++p) {
                    T dot{0};
                    for (std::size_t k = 0; k < c; ++k) dot += y[k * hw + p] * dy[k * hw + p];
                    for (std::size_t k = 0; k < c; ++k) {
                      d[k * hw + p] += y[k * hw + p] * (dy[k * hw + p] - dot);
                    }
                  }
                }
              });
}

template <typename T>
Var Graph<T>::batchnorm2d(Var x, Var gamma, Var beta, BatchNormStats<T>& stats,
                          bool training) {
  const Tensor<T>& in = value(x);
  require_rank4(in.shape(), "batchnorm2d");
  const std::size_t batch = in.dim(0), c = in.dim(1);
  const std::size_t hw = in.dim(2) * in.dim(3);
  const Shape cshape{c};
  if (value(gamma).shape() != cshape || value(beta).shape() != cshape ||
      stats.running_mean.shape() != cshape) {
    throw ShapeError("batchnorm2d parameters do not match " +
                     std::to_string(c) + " channels of input " +
                     shape_string(in.shape()));
  }
  const Tensor<T>& gm = value(gamma);
  const Tensor<T>& bt = value(beta);
  Tensor<T> out(in.shape());
  std::vector<T> xhat(in.size());
  std::vector<T> inv_std(c);
  const std::size_t count = batch * hw;
  for (std::size_t ch = 0; ch < c; ++ch) {
    T mean, var;
    if (training) {
      double s = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* src = in.raw() + (b * c + ch) * hw;
        for (std::size_t p = 0; p < hw; ++p) s += src[p];
      }
      mean = T(s / double(count));
      double v = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* src = in.raw() + (b * c + ch) * hw;
        for (std::size_t p = 0; p < hw; ++p) {
          const double d = double(src[p]) - double(mean);
          v += d * d;
        }
      }
      var = T(v / double(count));
      const T unbiased = count > 1 ? T(v / double(count - 1)) : var;
      stats.running_mean[ch] =
          (T{1} - stats.momentum) * stats.running_mean[ch] + stats.momentum * mean;
      stats.running_var[ch] =
          (T{1} - stats.momentum) * stats.running_var[ch] + stats.momentum * unbiased;
    } else {
      mean = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    inv_std[ch] = T{1} / std::sqrt(var + stats.eps);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = (b * c + ch) * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        const T xh = (in[base + p] - mean) * inv_std[ch];
        xhat[base + p] = xh;
        out[base + p] = gm[ch] * xh + bt[ch];
      }
    }
  }
  return push(
      OpKind::kBatchNorm2d, {x.id, gamma.id, beta.id}, std::move(out),
      [xhat = std::move(xhat), inv_std = std::move(inv_std), batch, c, hw,
       training](Graph& g, std::size_t self) {
        const Node& n = g.nodes_[self];
        const std::size_t xi = n.inputs[0], gi = n.inputs[1], bi = n.inputs[2];
        const Tensor<T>& gm = g.nodes_[gi].value;
        const double count = double(batch * hw);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_dy = 0, sum_dy_xhat = 0;
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t p = 0; p < hw; ++p) {
              sum_dy += n.grad[base + p];
              sum_dy_xhat += double(n.grad[base + p]) * xhat[base + p];
            }
          }
          if (g.needs_grad(gi)) g.grad_buffer(gi)[ch] += T(sum_dy_xhat);
          if (g.needs_grad(bi)) g.grad_buffer(bi)[ch] += T(sum_dy);
          if (!g.needs_grad(xi)) continue;
          Tensor<T>& dx = g.grad_buffer(xi);
          const T scale = gm[ch] * inv_std[ch];
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t p = 0; p < hw; ++p) {
              if (training) {
                dx[base + p] +=
                    scale * T(double(n.grad[base + p]) - sum_dy / count -
                              xhat[base + p] * sum_dy_xhat / count);
              } else {
                dx[base + p] += scale * n.grad[base + p];
              }
            }
          }
        }
      });
}

template <typename T>
Var Graph<T>::sum(Var x) {
  double s = 0;
  for (T v : value(x).data()) s += v;
  return push(OpKind::kSum, {x.id}, Tensor<T>(Shape{1}, T(s)),
              [](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dx = g.grad_buffer(n.inputs[0]);
                for (auto& v : dx.data()) v += n.grad[0];
              });
}

template <typename T>
Var Graph<T>::weighted_sum(Var x, Tensor<T> weights) {
  const Tensor<T>& in = value(x);
  if (weights.shape() != in.shape()) {
    throw ShapeError("weighted_sum weights " + shape_string(weights.shape()) +
                     " do not match input " + shape_string(in.shape()));
  }
  double s = 0;
  for (std::size_t i = 0; i < in.size(); ++i) s += double(in[i]) * weights[i];
  return push(OpKind::kWeightedSum, {x.id}, Tensor<T>(Shape{1}, T(s)),
              [w = std::move(weights)](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dx = g.grad_buffer(n.inputs[0]);
                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += n.grad[0] * w[i];
              });
}

template <typename T>
Var Graph<T>::cross_entropy(Var probs, const Tensor<T>& target) {
  const Tensor<T>& p = value(probs);
  check_simplex(p, "cross_entropy");
  check_target(p, target, "cross_entropy");
  const std::size_t batch = p.dim(0), c = p.dim(1), hw = p.dim(2) * p.dim(3);
  const double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
  std::vector<std::size_t> picked(batch * hw);
  double total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t px = 0; px < hw; ++px) {
      const auto cls = static_cast<std::size_t>(target[b * hw + px]);
      const std::size_t idx = (b * c + cls) * hw + px;
      picked[b * hw + px] = idx;
      total -= std::log(std::clamp(double(p[idx]), lo, hi));
    }
  }
  const double count = double(batch * hw);
  return push(OpKind::kCrossEntropy, {probs.id},
              Tensor<T>(Shape{1}, T(total / count)),
              [picked = std::move(picked), count, lo, hi](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                const Tensor<T>& p = g.nodes_[n.inputs[0]].value;
                Tensor<T>& dp = g.grad_buffer(n.inputs[0]);
                for (std::size_t idx : picked) {
                  const double v = p[idx];
                  if (v > lo && v < hi) dp[idx] += T(-double(n.grad[0]) / (v * count));
                }
              });
}

template <typename T>
Var Graph<T>::soft_dice(Var probs, const Tensor<T>& target, T smooth) {
  const Tensor<T>& p = value(probs);
  check_simplex(p, "soft_dice");
  check_target(p, target, "soft_dice");
  if (p.dim(1) < 2) throw ShapeError("soft_dice needs a foreground channel");
  const std::size_t batch = p.dim(0), c = p.dim(1), hw = p.dim(2) * p.dim(3);
  double inter = 0, psum = 0, gsum = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t px = 0; px < hw; ++px) {
      const double fg = p[(b * c + 1) * hw + px];
      const double gt = target[b * hw + px] == T{1} ? 1.0 : 0.0;
      inter += fg * gt;
      psum += fg;
      gsum += gt;
    }
  }
  const double s = smooth;
  const double denom = psum + gsum + s;
  const double loss = 1.0 - (2.0 * inter + s) / denom;
  return push(OpKind::kSoftDice, {probs.id}, Tensor<T>(Shape{1}, T(loss)),
              [target, batch, c, hw, inter, denom, s](Graph& g, std::size_t self) {
                const Node& n = g.nodes_[self];
                if (!g.needs_grad(n.inputs[0])) return;
                Tensor<T>& dp = g.grad_buffer(n.inputs[0]);
                const double num = 2.0 * inter + s;
                for (std::size_t b = 0; b < batch; ++b) {
                  for (std::size_t px = 0; px < hw; ++px) {
                    const double gt = target[b * hw + px] == T{1} ? 1.0 : 0.0;
                    const double d = -(2.0 * gt * denom - num) / (denom * denom);
                    dp[(b * c + 1) * hw + px] += T(double(n.grad[0]) * d);
                  }
                }
              });
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " +
                     shape_string(value(loss).shape()));
  }
  for (Node& n : nodes_) {
    if (!n.grad.empty()) n.grad.fill(T{0});
  }
  if (!needs_grad(loss.id)) return;
  grad_buffer(loss.id)[0] = T{1};
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace mdu
