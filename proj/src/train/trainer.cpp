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

#include "train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "tensor/errors.hpp"

namespace mdu {

std::string_view loss_name(LossKind kind) {
  return kind == LossKind::kSoftDice ? "soft_dice" : "cross_entropy";
}

LossKind parse_loss(std::string_view name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "soft_dice") return LossKind::kSoftDice;
  throw ConfigError("train.loss: unknown loss '" + std::string(name) +
                    "' (expected cross_entropy or soft_dice)");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("train.lr0 must be > 0");
  if (!(decay_factor >= 0.0 && decay_factor <= 1.0)) {
    throw ConfigError("train.decay_factor must lie in [0, 1]");
  }
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (decay_epoch < 1 || decay_epoch > epochs) {
    throw ConfigError("train.decay_epoch must lie in [1, epochs] (got " +
                      std::to_string(decay_epoch) + " with " + std::to_string(epochs) +
                      " epochs)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be > 0");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  return epoch <= decay_epoch ? lr0 : lr0 * decay_factor;
}

template <typename T>
Var segmentation_loss(Graph<T>& g, Var probs, const Tensor<T>& target, LossKind kind) {
  return kind == LossKind::kSoftDice ? g.soft_dice(probs, target) : g.cross_entropy(probs, target);
}

template Var segmentation_loss<float>(Graph<float>&, Var, const Tensor<float>&, LossKind);
template Var segmentation_loss<double>(Graph<double>&, Var, const Tensor<double>&, LossKind);

std::string TrainLog::csv() const {
  std::string out = "epoch,train_loss,val_dsc,val_mhd,val_vs,lr\n";
  char line[256];
  for (const auto& r : epochs) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.train_loss, r.val_dsc, r.val_mhd, r.val_vs, r.lr);
    out += line;
  }
  return out;
}

std::string TrainLog::timing_csv() const {
  std::string out = "epoch,wall_time\n";
  char line[64];
  for (const auto& r : epochs) {
    std::snprintf(line, sizeof line, "%zu,%.3f\n", r.epoch, r.wall_seconds);
    out += line;
  }
  return out;
}

Case prepare_case(Case c, const NetworkConfig& cfg) {
  c.validate();
  require_modalities(c, cfg.modalities);
  const auto s = c.shape();
  if (s[1] != cfg.height || s[2] != cfg.width) {
    throw DataError("case '" + c.id + "' has " + std::to_string(s[1]) + "x" +
                    std::to_string(s[2]) + " slices, the network expects " +
                    std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  }
  normalize_case(c);
  return c;
}

namespace {

struct Batch {
  std::vector<Tensor<float>> inputs;  // per modality, B×1×H×W
  Tensor<float> target;               // B×H×W
};

Batch assemble(const std::vector<SliceSample>& samples, const std::size_t* idx, std::size_t b) {
  const std::size_t n = samples[idx[0]].modalities.size();
  const std::size_t h = samples[idx[0]].label.dim(0), w = samples[idx[0]].label.dim(1);
  const std::size_t plane = h * w;
  Batch out{{}, Tensor<float>(Shape{b, h, w})};
  for (std::size_t m = 0; m < n; ++m) {
    Tensor<float> x(Shape{b, 1, h, w});
    for (std::size_t i = 0; i < b; ++i) {
      std::copy_n(samples[idx[i]].modalities[m].raw(), plane, x.raw() + i * plane);
    }
    out.inputs.push_back(std::move(x));
  }
  for (std::size_t i = 0; i < b; ++i) {
    std::copy_n(samples[idx[i]].label.raw(), plane, out.target.raw() + i * plane);
  }
  return out;
}

Var feed(Graph<float>& g, Network<float>& net, const Batch& batch, bool training) {
  std::vector<Var> in;
  for (const auto& x : batch.inputs) in.push_back(g.constant(x));
  return net.forward(g, in, training);
}

double mean_or_nan(const std::optional<MetricSummary>& s) {
  return s ? s->mean : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::vector<std::uint8_t> predict_case(Network<float>& net, const Case& c,
                                       std::size_t batch_size) {
  const auto samples = slice_case(c);
  const auto [d, h, w] = c.shape();
  const std::size_t plane = h * w;
  const std::size_t classes = net.config().num_classes;
  std::vector<std::uint8_t> mask(d * plane, 0);
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t b = std::min(batch_size, samples.size() - start);
    const Batch batch = assemble(samples, idx.data() + start, b);
    Graph<float> g;
    const Tensor<float>& p = g.value(feed(g, net, batch, false));
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = 0; k < plane; ++k) {
        std::size_t best = 0;
        for (std::size_t ch = 1; ch < classes; ++ch) {
          if (p[(i * classes + ch) * plane + k] > p[(i * classes + best) * plane + k]) best = ch;
        }
        mask[(start + i) * plane + k] = best == 1 ? 1 : 0;
      }
    }
  }
  return mask;
}

MetricsReport evaluate_cases(Network<float>& net, const std::vector<Case>& cases,
                             std::size_t batch_size) {
  std::vector<CaseMetrics> records;
  for (const auto& c : cases) {
    const SegmentationMask ref = c.mask_view();
    const SegmentationMask seg(c.shape(), predict_case(net, c, batch_size), c.spacing);
    records.push_back(evaluate_case(c.id, ref, seg));
  }
  return aggregate(std::move(records));
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(epoch),
                    std::uint32_t(epoch >> 32), 0x5348u};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = std::size_t(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

TrainLog train(Network<float>& net, const std::vector<Case>& train_cases,
               const std::vector<Case>& val_cases, const TrainConfig& cfg,
               const TrainHooks& hooks) {
  cfg.validate();
  if (train_cases.empty()) throw DataError("training set is empty");
  std::vector<SliceSample> samples;
  for (const auto& c : train_cases) {
    require_modalities(c, net.config().modalities);
    if (!c.mask) throw DataError("training case '" + c.id + "' has no ground-truth mask");
    for (auto& s : slice_case(c)) samples.push_back(std::move(s));
  }
  for (const auto& c : val_cases) {
    require_modalities(c, net.config().modalities);
    if (!c.mask) throw DataError("validation case '" + c.id + "' has no ground-truth mask");
  }

  auto& store = net.store();
  Adam<float> adam(store.parameters(), cfg.adam());
  TrainLog log;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    const auto order = shuffled_order(samples.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t b = std::min(cfg.batch_size, order.size() - start);
      const Batch batch = assemble(samples, order.data() + start, b);
      store.zero_grad();
      Graph<float> g;
      const auto diverged = [&] {
        return DivergenceError(int(epoch), int(batch_index),
                               "non-finite training loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_index));
      };
      const Var probs = feed(g, net, batch, true);
      const auto& p = g.value(probs).data();
      if (!std::all_of(p.begin(), p.end(), [](float v) { return std::isfinite(v); })) {
        throw diverged();
      }
      const Var loss = segmentation_loss(g, probs, batch.target, cfg.loss);
      const double value = g.value(loss)[0];
      if (!std::isfinite(value)) throw diverged();
      g.backward(loss);
      if (hooks.after_backward) hooks.after_backward(epoch, batch_index, store);
      adam.step(lr);
      loss_sum += value * double(b);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / double(samples.size());
    rec.lr = lr;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.val_dsc = rec.val_mhd = rec.val_vs = nan;
    if (!val_cases.empty()) {
      const MetricsReport report = evaluate_cases(net, val_cases, cfg.batch_size);
      rec.val_dsc = report.dsc.mean;
      rec.val_mhd = mean_or_nan(report.mhd);
      rec.val_vs = mean_or_nan(report.vs);
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.checkpoint &&
        (epoch == cfg.epochs || (cfg.checkpoint_every && epoch % cfg.checkpoint_every == 0))) {
      hooks.checkpoint(epoch);
    }
  }
  return log;
}

}  // namespace mdu
