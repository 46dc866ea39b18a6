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

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tensor/graph.hpp"
#include "tensor/parameter_store.hpp"

namespace mdu {

// Convolution followed by optional batch norm and ReLU. When batch norm is
// on the convolution has no bias (the normalisation would cancel it).
struct ConvUnitSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  Dilation dilation{};
  bool batchnorm = true;
  bool relu = true;

  std::size_t weight_count() const {
    return in_channels * out_channels * kernel_h * kernel_w;
  }
  std::size_t parameter_count() const;
};

template <typename T>
class ConvUnit {
 public:
  ConvUnit(ParameterStore<T>& store, const std::string& prefix, ConvUnitSpec spec);

  Var forward(Graph<T>& g, Var x, bool training);
  const ConvUnitSpec& spec() const { return spec_; }
  Parameter<T>& weight() { return *weight_; }

 private:
  ConvUnitSpec spec_;
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
  Parameter<T>* gamma_ = nullptr;
  Parameter<T>* beta_ = nullptr;
  BatchNormStats<T>* stats_ = nullptr;
};

enum class ModuleVariant { kStandard, kAsymmetric };

std::string_view variant_name(ModuleVariant v);

// Branch order used by every per-branch array below.
enum class Branch : std::size_t { k1x1 = 0, k3x3, k5x5, kDilatedA, kDilatedB };
inline constexpr std::size_t kBranchCount = 5;
std::string_view branch_name(Branch b);

// Extended inception module: 1×1, 3×3, 5×5 and two dilated 3×3 branches,
// concatenated channel-wise. There is no pooling branch. A zero branch width
// removes that branch.
struct InceptionSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  ModuleVariant variant = ModuleVariant::kStandard;
  std::array<std::size_t, 2> dilations{2, 4};
  std::array<std::size_t, kBranchCount> widths{1, 0, 0, 0, 0};
  bool batchnorm = true;

  // Equal split over the five branches, remainder to the 1×1 branch.
  static std::array<std::size_t, kBranchCount> default_widths(std::size_t out);
  static InceptionSpec make(std::size_t in, std::size_t out,
                            ModuleVariant variant = ModuleVariant::kStandard,
                            std::array<std::size_t, 2> dilations = {2, 4},
                            bool batchnorm = true);

  // Throws ConfigError naming the violated rule.
  void validate() const;

  // Kernel extent (n) and dilation of a spatial branch; n = 1 for the 1×1.
  std::size_t kernel_extent(Branch b) const;
  std::size_t dilation(Branch b) const;
};

struct InceptionParameterCount {
  std::size_t total = 0;
  std::array<std::size_t, kBranchCount> per_branch{};
  // Weights of the n×n convolution (standard) or of the 1×n plus n×1 pair
  // (asymmetric); zero for the 1×1 branch.
  std::array<std::size_t, kBranchCount> spatial_kernel_weights{};
};

InceptionParameterCount parameter_count(const InceptionSpec& spec);

// Conv units making up one branch, in execution order.
std::vector<ConvUnitSpec> branch_layout(const InceptionSpec& spec, Branch b);

template <typename T>
class InceptionBlock {
 public:
  InceptionBlock(ParameterStore<T>& store, const std::string& prefix,
                 InceptionSpec spec);

  Var forward(Graph<T>& g, Var x, bool training);
  // Output of one branch alone; used for receptive-field inspection.
  Var forward_branch(Graph<T>& g, Var x, Branch b, bool training);

  const InceptionSpec& spec() const { return spec_; }

 private:
  InceptionSpec spec_;
  std::array<std::vector<ConvUnit<T>>, kBranchCount> branches_;
};

extern template class ConvUnit<float>;
extern template class ConvUnit<double>;
extern template class InceptionBlock<float>;
extern template class InceptionBlock<double>;

}  // namespace mdu
