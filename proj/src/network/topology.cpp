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

#include "network/topology.hpp"

#include <sstream>

namespace mdu {

std::vector<FeatureBlock> permutation(std::size_t stream, std::size_t layer,
                                      std::size_t num_streams) {
  if (num_streams == 0 || stream < 1 || stream > num_streams) {
    throw ConfigError("stream index " + std::to_string(stream) +
                      " outside [1, " + std::to_string(num_streams) + "]");
  }
  std::vector<FeatureBlock> order;
  order.reserve(layer * num_streams);
  for (std::size_t j = layer; j-- > 0;) {
    for (std::size_t k = 0; k < num_streams; ++k) {
      order.push_back({(stream - 1 + k) % num_streams + 1, j});
    }
  }
  return order;
}

std::string encoder_layer_name(std::size_t layer) {
  return layer == 0 ? "Conv Layer 1" : "Layer " + std::to_string(layer + 1);
}

std::string pool_name(std::size_t layer) {
  return "Max-pooling " + std::to_string(layer + 1);
}

std::string upsample_name(std::size_t level) {
  return "Up-sample " + std::to_string(level);
}

std::string decoder_layer_name(const NetworkConfig& cfg, std::size_t level) {
  return "Layer " + std::to_string(cfg.depth + level);
}

ShapeTable shape_table(const NetworkConfig& cfg) {
  cfg.validate();
  const auto chw = [&](std::size_t c, std::size_t level) {
    return Shape{c, cfg.level_height(level), cfg.level_width_px(level)};
  };
  ShapeTable t;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const std::size_t w = cfg.level_width(l);
    t.rows.push_back({encoder_layer_name(l), chw(cfg.encoder_input_channels(l), l), chw(w, l)});
    t.rows.push_back({pool_name(l), chw(w, l), chw(w, l + 1)});
  }
  t.rows.push_back({kBridgeName, chw(cfg.encoder_input_channels(cfg.depth), cfg.depth),
                    chw(cfg.level_width(cfg.depth), cfg.depth)});
  for (std::size_t i = 1; i <= cfg.depth; ++i) {
    const std::size_t level = cfg.depth - i;
    const std::size_t c = cfg.level_width(level);
    t.rows.push_back({upsample_name(i), chw(2 * c, level + 1), chw(c, level)});
    t.rows.push_back({decoder_layer_name(cfg, i), chw(c, level), chw(c, level)});
  }
  t.rows.push_back({kSoftmaxName, chw(cfg.base_width, 0), chw(cfg.num_classes, 0)});
  return t;
}

namespace {

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char ch : s) {
    if ((ch & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string pad(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return w >= width ? s + " " : s + std::string(width - w, ' ');
}

}  // namespace

std::string ShapeTable::text() const {
  std::ostringstream out;
  for (const auto& r : rows) {
    out << pad(r.name, 15) << pad(shape_string(r.input), 12) << "→ "
        << shape_string(r.output) << '\n';
  }
  return out.str();
}

std::string ShapeTable::csv() const {
  std::ostringstream out;
  out << "layer,input,output\n";
  for (const auto& r : rows) {
    out << r.name << ',' << shape_string(r.input, "x") << ','
        << shape_string(r.output, "x") << '\n';
  }
  return out.str();
}

std::vector<Edge> connectivity_graph(const NetworkConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.encoder_streams();
  std::vector<Edge> edges;
  for (std::size_t l = 1; l < cfg.depth; ++l) {
    for (std::size_t s = 1; s <= n; ++s) {
      if (cfg.fusion == Fusion::kHyperdense) {
        for (const auto& b : permutation(s, l, n)) edges.push_back({b, {s, l}});
      } else {
        edges.push_back({{s, l - 1}, {s, l}});
      }
    }
  }
  const FeatureBlock bridge{0, cfg.depth};
  if (cfg.fusion == Fusion::kHyperdense) {
    for (const auto& b : permutation(1, cfg.depth, n)) edges.push_back({b, bridge});
  } else {
    for (std::size_t s = 1; s <= n; ++s) edges.push_back({{s, cfg.depth - 1}, bridge});
  }
  for (std::size_t i = 1; i <= cfg.depth; ++i) {
    const FeatureBlock dst{0, cfg.depth + i};
    edges.push_back({{0, cfg.depth + i - 1}, dst});
    for (std::size_t s = 1; s <= n; ++s) edges.push_back({{s, cfg.depth - i}, dst});
  }
  return edges;
}

std::string connectivity_text(const std::vector<Edge>& edges) {
  std::ostringstream out;
  for (const auto& e : edges) {
    out << e.src.stream << '.' << e.src.layer << " -> " << e.dst.stream << '.'
        << e.dst.layer << '\n';
  }
  return out.str();
}

}  // namespace mdu
