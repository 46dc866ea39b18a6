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

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tensor/tensor.hpp"

namespace mdu {

enum class OpKind {
  kConstant,
  kVariable,
  kParameter,
  kConv2d,
  kMaxPool2d,
  kAvgPool2d,
  kUpsample2x,
  kConcat,
  kSliceChannels,
  kAdd,
  kRelu,
  kSoftmaxChannels,
  kBatchNorm2d,
  kSum,
  kWeightedSum,
  kCrossEntropy,
  kSoftDice,
};

std::string_view op_name(OpKind kind);

struct Dilation {
  std::size_t h = 1;
  std::size_t w = 1;
};

// Running statistics owned by a batch-norm layer; updated by forward passes
// in training mode, consumed in inference mode.
template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BatchNormStats(std::size_t channels)
      : running_mean(Shape{channels}, T{0}),
        running_var(Shape{channels}, T{1}) {}
};

// Probability clamp shared by the cross-entropy forward and backward.
inline constexpr double kProbabilityClamp = 1e-7;
// Tolerance on per-pixel channel sums accepted by the losses.
inline constexpr double kSimplexTolerance = 1e-4;

// Handle to a node of one Graph.
struct Var {
  std::size_t id = 0;
};

// Tape of differentiable operations. Nodes are appended in execution order,
// which is a topological order, so backward() is a reverse sweep. A graph is
// confined to one thread.
template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Var constant(Tensor<T> value);
  Var variable(Tensor<T> value);
  Var parameter(Parameter<T>& param);

  // Same-padded, stride-1 convolution. Kernel axes must be odd (1 allowed).
  Var conv2d(Var x, Var kernel, std::optional<Var> bias, Dilation dilation = {});
  Var maxpool2d(Var x);
  Var avgpool2d(Var x);
  Var upsample2x(Var x);
  Var concat(std::span<const Var> inputs);
  Var slice_channels(Var x, std::size_t begin, std::size_t count);
  Var add(std::span<const Var> inputs);
  Var relu(Var x);
  Var softmax_channels(Var x);
  Var batchnorm2d(Var x, Var gamma, Var beta, BatchNormStats<T>& stats,
                  bool training);

  // Scalar reductions.
  Var sum(Var x);
  Var weighted_sum(Var x, Tensor<T> weights);
  // `target` is B×H×W with class indices stored as values.
  Var cross_entropy(Var probs, const Tensor<T>& target);
  Var soft_dice(Var probs, const Tensor<T>& target, T smooth = T{1});

  // Reverse sweep from a scalar node; parameter gradients are accumulated
  // into Parameter::grad.
  void backward(Var loss);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  // Zero tensor when no gradient reached the node.
  Tensor<T> grad(Var v) const;
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void(Graph&, std::size_t)> backward;
  };

  Var push(OpKind kind, std::vector<std::size_t> inputs, Tensor<T> value,
           std::function<void(Graph&, std::size_t)> backward);
  Tensor<T>& grad_buffer(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mdu
