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

#include "network/network.hpp"

namespace mdu {

namespace {

Shape drop_batch(const Shape& s) { return Shape(s.begin() + 1, s.end()); }

}  // namespace

template <typename T>
Network<T>::Network(NetworkConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), store_(std::make_unique<ParameterStore<T>>(seed)) {
  cfg_.validate();
  const std::size_t streams = cfg_.encoder_streams();
  encoder_.resize(streams);
  for (std::size_t s = 0; s < streams; ++s) {
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
      encoder_[s].emplace_back(
          *store_, "stream" + std::to_string(s + 1) + "/layer" + std::to_string(l + 1),
          cfg_.block_spec(cfg_.encoder_input_channels(l), cfg_.level_width(l)));
    }
  }
  bridge_.emplace_back(*store_, "bridge",
                       cfg_.block_spec(cfg_.encoder_input_channels(cfg_.depth),
                                       cfg_.level_width(cfg_.depth)));
  for (std::size_t i = 1; i <= cfg_.depth; ++i) {
    const std::size_t c = cfg_.level_width(cfg_.depth - i);
    up_.emplace_back(*store_, "up" + std::to_string(i) + "/reduce",
                     ConvUnitSpec{2 * c, c, 1, 1, {}, cfg_.batchnorm, true});
    decoder_.emplace_back(*store_, "decoder/layer" + std::to_string(cfg_.depth + i),
                          cfg_.block_spec(c, c));
  }
  head_.emplace_back(*store_, "head",
                     ConvUnitSpec{cfg_.base_width, cfg_.num_classes, 1, 1, {}, false, false});
}

template <typename T>
Var Network<T>::pool(Graph<T>& g, Var x) const {
  return cfg_.dense_pool == DensePool::kMax ? g.maxpool2d(x) : g.avgpool2d(x);
}

template <typename T>
Var Network<T>::forward(Graph<T>& g, std::span<const Var> modalities, bool training,
                        ShapeTable* trace) {
  const std::size_t n = cfg_.num_modalities();
  if (modalities.size() != n) {
    throw ShapeError("network expects " + std::to_string(n) + " modality inputs, got " +
                     std::to_string(modalities.size()));
  }
  const Shape& first = g.value(modalities[0]).shape();
  for (std::size_t m = 0; m < n; ++m) {
    const Shape& s = g.value(modalities[m]).shape();
    if (s.size() != 4 || s[1] != 1 || s[2] != cfg_.height || s[3] != cfg_.width ||
        s[0] != first[0]) {
      throw ShapeError("modality input " + std::to_string(m) + " has shape " +
                       shape_string(s) + ", expected B×1×" + std::to_string(cfg_.height) +
                       "×" + std::to_string(cfg_.width));
    }
  }
  const auto record = [&](const std::string& name, Var in, Var out) {
    if (trace) {
      trace->rows.push_back({name, drop_batch(g.value(in).shape()),
                             drop_batch(g.value(out).shape())});
    }
  };

  const std::size_t streams = cfg_.encoder_streams();
  const bool dense = cfg_.fusion == Fusion::kHyperdense;
  // pooled[s]: every earlier layer output of stream s, pooled to the current level
  std::vector<std::vector<Var>> pooled(streams);
  std::vector<Var> skips;
  std::vector<Var> outs(streams);

  for (std::size_t l = 0; l < cfg_.depth; ++l) {
    for (std::size_t s = 0; s < streams; ++s) {
      Var in;
      if (l == 0) {
        in = cfg_.fusion == Fusion::kEarly
                 ? (n == 1 ? modalities[0] : g.concat(modalities))
                 : modalities[s];
      } else if (dense) {
        std::vector<Var> blocks;
        for (const auto& b : permutation(s + 1, l, streams)) {
          blocks.push_back(pooled[b.stream - 1][b.layer]);
        }
        in = blocks.size() == 1 ? blocks.front() : g.concat(blocks);
      } else {
        in = pooled[s].back();
      }
      outs[s] = encoder_[s][l].forward(g, in, training);
      if (s == 0) record(encoder_layer_name(l), in, outs[s]);
    }
    skips.push_back(streams == 1 ? outs[0] : g.add(outs));
    for (std::size_t s = 0; s < streams; ++s) {
      if (dense) {
        for (auto& earlier : pooled[s]) earlier = pool(g, earlier);
      } else {
        pooled[s].clear();
      }
      Var p = pool(g, outs[s]);
      if (s == 0) record(pool_name(l), outs[s], p);
      pooled[s].push_back(p);
    }
  }

  Var bridge_in;
  if (dense) {
    std::vector<Var> blocks;
    for (const auto& b : permutation(1, cfg_.depth, streams)) {
      blocks.push_back(pooled[b.stream - 1][b.layer]);
    }
    bridge_in = blocks.size() == 1 ? blocks.front() : g.concat(blocks);
  } else {
    std::vector<Var> blocks;
    for (std::size_t s = 0; s < streams; ++s) blocks.push_back(pooled[s].back());
    bridge_in = blocks.size() == 1 ? blocks.front() : g.concat(blocks);
  }
  Var y = bridge_[0].forward(g, bridge_in, training);
  record(kBridgeName, bridge_in, y);

  for (std::size_t i = 1; i <= cfg_.depth; ++i) {
    Var up = up_[i - 1].forward(g, g.upsample2x(y), training);
    record(upsample_name(i), y, up);
    const Var parts[] = {up, skips[cfg_.depth - i]};
    Var merged = g.add(parts);
    y = decoder_[i - 1].forward(g, merged, training);
    record(decoder_layer_name(cfg_, i), merged, y);
  }
  Var probs = g.softmax_channels(head_[0].forward(g, y, training));
  record(kSoftmaxName, y, probs);
  return probs;
}

template class Network<float>;
template class Network<double>;

}  // namespace mdu
