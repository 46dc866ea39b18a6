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

#include "inception/inception.hpp"

namespace mdu {

enum class Fusion { kEarly, kLate, kHyperdense };
// How earlier, larger feature maps are brought down to a dense layer's
// resolution.
enum class DensePool { kMax, kAverage };

std::string_view fusion_name(Fusion f);
std::string_view dense_pool_name(DensePool p);

// Declarative description of a multi-path U-Net. One encoder stream per
// modality (a single stream for early fusion).
struct NetworkConfig {
  std::vector<std::string> modalities{"CBV", "CTP", "DWI", "MTT"};
  Fusion fusion = Fusion::kHyperdense;
  ModuleVariant module = ModuleVariant::kStandard;
  std::size_t base_width = 32;
  std::size_t depth = 4;
  std::size_t height = 256;
  std::size_t width = 256;
  std::size_t num_classes = 2;
  bool batchnorm = true;
  DensePool dense_pool = DensePool::kMax;
  std::array<std::size_t, 2> dilations{2, 4};

  std::size_t num_modalities() const { return modalities.size(); }
  // Encoder paths actually built: 1 for early fusion, N otherwise.
  std::size_t encoder_streams() const {
    return fusion == Fusion::kEarly ? 1 : modalities.size();
  }
  // Output channels of encoder level `level` (0-based); level == depth is
  // the bridge.
  std::size_t level_width(std::size_t level) const { return base_width << level; }
  std::size_t level_height(std::size_t level) const { return height >> level; }
  std::size_t level_width_px(std::size_t level) const { return width >> level; }

  // Input channels of encoder layer `layer` (0-based; layer == depth is the
  // bridge).
  std::size_t encoder_input_channels(std::size_t layer) const;

  InceptionSpec block_spec(std::size_t in, std::size_t out) const;

  // Throws ConfigError naming the offending field.
  void validate() const;

  // Names modalities M1..Mn; the four-modality default keeps the CBV, CTP,
  // DWI, MTT labels.
  static std::vector<std::string> default_modalities(std::size_t n);
};

}  // namespace mdu
