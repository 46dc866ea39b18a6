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

#include "inception/inception.hpp"

#include <numeric>

namespace mdu {

std::size_t ConvUnitSpec::parameter_count() const {
  // bias when there is no norm, otherwise gamma and beta
  return weight_count() + (batchnorm ? 2 * out_channels : out_channels);
}

template <typename T>
ConvUnit<T>::ConvUnit(ParameterStore<T>& store, const std::string& prefix,
                      ConvUnitSpec spec)
    : spec_(spec) {
  const std::size_t fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w;
  weight_ = &store.create(
      prefix + "/weight",
      Shape{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w},
      Init::kHeNormal, fan_in);
  if (spec.batchnorm) {
    gamma_ = &store.create(prefix + "/bn_gamma", Shape{spec.out_channels}, Init::kOnes);
    beta_ = &store.create(prefix + "/bn_beta", Shape{spec.out_channels}, Init::kZeros);
    stats_ = &store.create_stats(prefix + "/bn_stats", spec.out_channels);
  } else {
    bias_ = &store.create(prefix + "/bias", Shape{spec.out_channels}, Init::kZeros);
  }
}

template <typename T>
Var ConvUnit<T>::forward(Graph<T>& g, Var x, bool training) {
  std::optional<Var> bias;
  if (bias_) bias = g.parameter(*bias_);
  Var y = g.conv2d(x, g.parameter(*weight_), bias, spec_.dilation);
  if (spec_.batchnorm) {
    y = g.batchnorm2d(y, g.parameter(*gamma_), g.parameter(*beta_), *stats_, training);
  }
  if (spec_.relu) y = g.relu(y);
  return y;
}

std::string_view variant_name(ModuleVariant v) {
  return v == ModuleVariant::kStandard ? "standard" : "asymmetric";
}

std::string_view branch_name(Branch b) {
  switch (b) {
    case Branch::k1x1: return "b1x1";
    case Branch::k3x3: return "b3x3";
    case Branch::k5x5: return "b5x5";
    case Branch::kDilatedA: return "bdilA";
    case Branch::kDilatedB: return "bdilB";
  }
  return "?";
}

std::array<std::size_t, kBranchCount> InceptionSpec::default_widths(std::size_t out) {
  const std::size_t w = out / kBranchCount;
  const std::size_t rem = out % kBranchCount;
  return {w + rem, w, w, w, w};
}

InceptionSpec InceptionSpec::make(std::size_t in, std::size_t out,
                                  ModuleVariant variant,
                                  std::array<std::size_t, 2> dilations,
                                  bool batchnorm) {
  InceptionSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.variant = variant;
  s.dilations = dilations;
  s.widths = default_widths(out);
  s.batchnorm = batchnorm;
  return s;
}

void InceptionSpec::validate() const {
  if (in_channels == 0 || out_channels == 0) {
    throw ConfigError("inception channel counts must be positive");
  }
  const std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  if (total != out_channels) {
    throw ConfigError("inception branch widths sum to " + std::to_string(total) +
                      " but out_channels is " + std::to_string(out_channels));
  }
  if (dilations[0] <= 1 || dilations[1] <= 1) {
    throw ConfigError("inception dilation rates must both be > 1");
  }
  if (dilations[0] == dilations[1]) {
    throw ConfigError("inception dilation rates must be distinct");
  }
}

std::size_t InceptionSpec::kernel_extent(Branch b) const {
  switch (b) {
    case Branch::k1x1: return 1;
    case Branch::k5x5: return 5;
    default: return 3;
  }
}

std::size_t InceptionSpec::dilation(Branch b) const {
  if (b == Branch::kDilatedA) return dilations[0];
  if (b == Branch::kDilatedB) return dilations[1];
  return 1;
}

std::vector<ConvUnitSpec> branch_layout(const InceptionSpec& spec, Branch b) {
  const std::size_t w = spec.widths[static_cast<std::size_t>(b)];
  if (w == 0) return {};
  ConvUnitSpec reduce{spec.in_channels, w, 1, 1, {}, spec.batchnorm, true};
  if (b == Branch::k1x1) return {reduce};
  const std::size_t n = spec.kernel_extent(b);
  const Dilation d{spec.dilation(b), spec.dilation(b)};
  if (spec.variant == ModuleVariant::kStandard) {
    return {reduce, ConvUnitSpec{w, w, n, n, d, spec.batchnorm, true}};
  }
  return {reduce, ConvUnitSpec{w, w, 1, n, d, spec.batchnorm, true},
          ConvUnitSpec{w, w, n, 1, d, spec.batchnorm, true}};
}

InceptionParameterCount parameter_count(const InceptionSpec& spec) {
  spec.validate();
  InceptionParameterCount out;
  for (std::size_t i = 0; i < kBranchCount; ++i) {
    const auto layout = branch_layout(spec, static_cast<Branch>(i));
    for (std::size_t u = 0; u < layout.size(); ++u) {
      out.per_branch[i] += layout[u].parameter_count();
      if (u > 0) out.spatial_kernel_weights[i] += layout[u].weight_count();
    }
    out.total += out.per_branch[i];
  }
  return out;
}

template <typename T>
InceptionBlock<T>::InceptionBlock(ParameterStore<T>& store, const std::string& prefix,
                                  InceptionSpec spec)
    : spec_(spec) {
  spec_.validate();
  for (std::size_t i = 0; i < kBranchCount; ++i) {
    const auto b = static_cast<Branch>(i);
    const auto layout = branch_layout(spec_, b);
    const std::string bprefix = prefix + "/" + std::string(branch_name(b));
    for (std::size_t u = 0; u < layout.size(); ++u) {
      const std::string uname = u == 0 ? "reduce" : "conv" + std::to_string(u);
      branches_[i].emplace_back(store, bprefix + "/" + uname, layout[u]);
    }
  }
}

template <typename T>
Var InceptionBlock<T>::forward_branch(Graph<T>& g, Var x, Branch b, bool training) {
  auto& units = branches_[static_cast<std::size_t>(b)];
  if (units.empty()) {
    throw ConfigError("inception branch " + std::string(branch_name(b)) +
                      " has zero width");
  }
  Var y = x;
  for (auto& unit : units) y = unit.forward(g, y, training);
  return y;
}

template <typename T>
Var InceptionBlock<T>::forward(Graph<T>& g, Var x, bool training) {
  std::vector<Var> outs;
  for (std::size_t i = 0; i < kBranchCount; ++i) {
    if (branches_[i].empty()) continue;
    outs.push_back(forward_branch(g, x, static_cast<Branch>(i), training));
  }
  if (outs.size() == 1) return outs.front();
  return g.concat(outs);
}

template class ConvUnit<float>;
template class ConvUnit<double>;
template class InceptionBlock<float>;
template class InceptionBlock<double>;

}  // namespace mdu
