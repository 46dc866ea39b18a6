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
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "data/case.hpp"
#include "metrics/metrics.hpp"
#include "network/network.hpp"
#include "train/adam.hpp"

namespace mdu {

enum class LossKind { kCrossEntropy, kSoftDice };

std::string_view loss_name(LossKind kind);
LossKind parse_loss(std::string_view name);

struct TrainConfig {
  double lr0 = 1e-4;
  std::size_t decay_epoch = 100;
  double decay_factor = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  std::size_t batch_size = 4;
  std::size_t epochs = 200;
  LossKind loss = LossKind::kCrossEntropy;
  std::uint64_t seed = 0;
  // Save a checkpoint every k epochs; 0 saves only the final one.
  std::size_t checkpoint_every = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Epochs are 1-based: lr0 up to and including decay_epoch, then lr0·factor.
  double lr_at(std::size_t epoch) const;
  AdamHyper adam() const { return {beta1, beta2, epsilon}; }
};

template <typename T>
Var segmentation_loss(Graph<T>& g, Var probs, const Tensor<T>& target, LossKind kind);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  // NaN when no validation cases are given or a metric is undefined on all of them.
  double val_dsc = 0;
  double val_mhd = 0;
  double val_vs = 0;
  double lr = 0;
  double wall_seconds = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  // epoch,train_loss,val_dsc,val_mhd,val_vs,lr at full precision. Wall
  // times live in timing_csv() so that this file is reproducible.
  std::string csv() const;
  std::string timing_csv() const;
};

// Checks modalities and slice size against the network and rescales every
// volume to [0, 1].
Case prepare_case(Case c, const NetworkConfig& cfg);

// Argmax masks in inference mode, D×H×W, for a prepared case.
std::vector<std::uint8_t> predict_case(Network<float>& net, const Case& c,
                                       std::size_t batch_size = 4);

// Metrics of predicted masks against the cases' own ground truth.
MetricsReport evaluate_cases(Network<float>& net, const std::vector<Case>& cases,
                             std::size_t batch_size = 4);

struct TrainHooks {
  // After backward, before the optimizer step.
  std::function<void(std::size_t epoch, std::size_t batch, const ParameterStore<float>&)>
      after_backward;
  std::function<void(const EpochRecord&)> on_epoch;
  // Called every checkpoint_every epochs and after the last one.
  std::function<void(std::size_t epoch)> checkpoint;
};

// Slice-wise minibatch training. Cases must already be prepared. Throws
// DivergenceError on a non-finite batch loss.
TrainLog train(Network<float>& net, const std::vector<Case>& train_cases,
               const std::vector<Case>& val_cases, const TrainConfig& cfg,
               const TrainHooks& hooks = {});

// Fisher-Yates order of 0..n-1 driven by a seeded mt19937_64; identical on
// every platform.
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace mdu
