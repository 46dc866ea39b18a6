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
#include <string>
#include <vector>

#include "network/config.hpp"
#include "tensor/tensor.hpp"

namespace mdu {

// Output of encoder layer `layer` (0-based) in stream `stream` (1-based).
// Stream 0 labels the fused path: bridge and decoder.
struct FeatureBlock {
  std::size_t stream = 0;
  std::size_t layer = 0;

  friend bool operator==(const FeatureBlock&, const FeatureBlock&) = default;
  friend auto operator<=>(const FeatureBlock&, const FeatureBlock&) = default;
};

// Concatenation order of the dense inputs of layer `layer` in stream
// `stream`: layer groups from layer-1 down to 0, and inside each group the
// streams rotated so that `stream` comes first. Throws ConfigError when
// `stream` is outside [1, num_streams].
std::vector<FeatureBlock> permutation(std::size_t stream, std::size_t layer,
                                      std::size_t num_streams);

struct ShapeRow {
  std::string name;
  Shape input;   // C×H×W
  Shape output;  // C×H×W

  friend bool operator==(const ShapeRow&, const ShapeRow&) = default;
};

struct ShapeTable {
  std::vector<ShapeRow> rows;

  // One row per line: name, input and output shapes, aligned.
  std::string text() const;
  std::string csv() const;
  friend bool operator==(const ShapeTable&, const ShapeTable&) = default;
};

// Row names shared by the symbolic table and the runtime trace.
std::string encoder_layer_name(std::size_t layer);
std::string pool_name(std::size_t layer);
std::string upsample_name(std::size_t level);
std::string decoder_layer_name(const NetworkConfig& cfg, std::size_t level);
inline const char* kBridgeName = "Bridge";
inline const char* kSoftmaxName = "Softmax layer";

// Per-stream layer disposal, derived symbolically from the config.
ShapeTable shape_table(const NetworkConfig& cfg);

struct Edge {
  FeatureBlock src;
  FeatureBlock dst;
};

// Data dependencies between layer outputs. Encoder nodes are s.l, the bridge
// is 0.depth and decoder layers are 0.(depth+1) .. 0.(2·depth). Edges into
// one node are listed in concatenation order.
std::vector<Edge> connectivity_graph(const NetworkConfig& cfg);
// "src_stream.src_layer -> dst_stream.dst_layer", one edge per line.
std::string connectivity_text(const std::vector<Edge>& edges);

}  // namespace mdu
