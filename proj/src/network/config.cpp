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

#include "network/config.hpp"

#include <set>

namespace mdu {

std::string_view fusion_name(Fusion f) {
  switch (f) {
    case Fusion::kEarly: return "early";
    case Fusion::kLate: return "late";
    case Fusion::kHyperdense: return "hyperdense";
  }
  return "?";
}

std::string_view dense_pool_name(DensePool p) {
  return p == DensePool::kMax ? "max" : "average";
}

std::vector<std::string> NetworkConfig::default_modalities(std::size_t n) {
  if (n == 4) return {"CBV", "CTP", "DWI", "MTT"};
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back("M" + std::to_string(i));
  return out;
}

std::size_t NetworkConfig::encoder_input_channels(std::size_t layer) const {
  const std::size_t n = num_modalities();
  switch (fusion) {
    case Fusion::kEarly:
      return layer == 0 ? n : level_width(layer - 1);
    case Fusion::kLate:
      if (layer == 0) return 1;
      return layer == depth ? n * level_width(depth - 1) : level_width(layer - 1);
    case Fusion::kHyperdense: {
      if (layer == 0) return 1;
      std::size_t c = 0;
      for (std::size_t j = 0; j < layer; ++j) c += level_width(j);
      return n * c;
    }
  }
  return 0;
}

InceptionSpec NetworkConfig::block_spec(std::size_t in, std::size_t out) const {
  return InceptionSpec::make(in, out, module, dilations, batchnorm);
}

void NetworkConfig::validate() const {
  if (modalities.empty()) {
    throw ConfigError("network.streams: at least one modality stream is required");
  }
  std::set<std::string> seen;
  for (const auto& m : modalities) {
    if (m.empty()) throw ConfigError("network.modalities: empty modality name");
    if (!seen.insert(m).second) {
      throw ConfigError("network.modalities: duplicate modality '" + m + "'");
    }
  }
  if (base_width == 0) throw ConfigError("network.base_width must be >= 1");
  if (depth == 0 || depth > 8) throw ConfigError("network.depth must be in [1, 8]");
  if (height == 0 || width == 0) throw ConfigError("network.input extents must be >= 1");
  const std::size_t unit = std::size_t{1} << depth;
  if (height % unit || width % unit) {
    throw ConfigError("network.input " + std::to_string(height) + "x" +
                      std::to_string(width) + " is not divisible by 2^depth = " +
                      std::to_string(unit));
  }
  if (num_classes < 2) throw ConfigError("network.num_classes must be >= 2");
  if (dilations[0] <= 1 || dilations[1] <= 1 || dilations[0] == dilations[1]) {
    throw ConfigError("network.inception.dilations must be two distinct rates > 1");
  }
}

}  // namespace mdu
