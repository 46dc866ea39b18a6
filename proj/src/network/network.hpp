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

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "inception/inception.hpp"
#include "network/config.hpp"
#include "network/topology.hpp"
#include "tensor/graph.hpp"
#include "tensor/parameter_store.hpp"

namespace mdu {

// Multi-path U-Net in early, late or hyper-dense fusion mode.
//
// Every encoder layer, the bridge and every decoder layer is an extended
// inception block. In hyper-dense mode layer l of stream s consumes the
// permuted concatenation of all earlier layer outputs of all streams, each
// pooled down to layer l's resolution. Skip tensors are summed over the
// streams and added to the upsampled decoder feature.
template <typename T>
class Network {
 public:
  Network(NetworkConfig cfg, std::uint64_t seed);

  // `modalities` holds one B×1×H×W input per modality, in config order.
  // Returns B×num_classes×H×W channel probabilities. When `trace` is given,
  // the shapes seen by stream 1 are recorded in shape-table form.
  Var forward(Graph<T>& g, std::span<const Var> modalities, bool training,
              ShapeTable* trace = nullptr);

  const NetworkConfig& config() const { return cfg_; }
  ParameterStore<T>& store() { return *store_; }
  const ParameterStore<T>& store() const { return *store_; }
  std::size_t parameter_count() const { return store_->scalar_count(); }

 private:
  Var pool(Graph<T>& g, Var x) const;

  NetworkConfig cfg_;
  std::unique_ptr<ParameterStore<T>> store_;
  std::vector<std::vector<InceptionBlock<T>>> encoder_;
  std::vector<InceptionBlock<T>> bridge_;
  std::vector<ConvUnit<T>> up_;
  std::vector<InceptionBlock<T>> decoder_;
  std::vector<ConvUnit<T>> head_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace mdu
