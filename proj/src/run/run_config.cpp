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

#include "run/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <set>

#include "tensor/errors.hpp"

namespace mdu {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + " must be a JSON object");
}

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& keys) {
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) {
      throw ConfigError((path.empty() ? k : path + "." + k) + ": unknown field");
    }
  }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& path, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  const std::string field = path.empty() ? key : path + "." + key;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_unsigned()) throw ConfigError(field + " must be a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(field + " must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(field + " must be true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(field + " must be a string");
    }
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

}  // namespace

NetworkConfig parse_network_config(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown(j, path,
                 {"modalities", "fusion", "module", "base_width", "depth", "height", "width",
                  "num_classes", "batchnorm", "dense_pool", "dilations"});
  NetworkConfig c;
  if (j.contains("modalities")) {
    const auto& m = j.at("modalities");
    if (m.is_number_unsigned()) {
      c.modalities = NetworkConfig::default_modalities(m.get<std::size_t>());
    } else if (m.is_array() && std::all_of(m.begin(), m.end(),
                                           [](const json& v) { return v.is_string(); })) {
      c.modalities = m.get<std::vector<std::string>>();
    } else {
      throw ConfigError(path + ".modalities must be a count or a list of names");
    }
  }
  const std::string fusion = get<std::string>(j, "fusion", path, "hyperdense");
  if (fusion == "early") c.fusion = Fusion::kEarly;
  else if (fusion == "late") c.fusion = Fusion::kLate;
  else if (fusion == "hyperdense") c.fusion = Fusion::kHyperdense;
  else throw ConfigError(path + ".fusion: unknown value '" + fusion + "'");
  const std::string module = get<std::string>(j, "module", path, "standard");
  if (module == "standard") c.module = ModuleVariant::kStandard;
  else if (module == "asymmetric") c.module = ModuleVariant::kAsymmetric;
  else throw ConfigError(path + ".module: unknown value '" + module + "'");
  c.base_width = get<std::size_t>(j, "base_width", path, c.base_width);
  c.depth = get<std::size_t>(j, "depth", path, c.depth);
  c.height = get<std::size_t>(j, "height", path, c.height);
  c.width = get<std::size_t>(j, "width", path, c.width);
  c.num_classes = get<std::size_t>(j, "num_classes", path, c.num_classes);
  c.batchnorm = get<bool>(j, "batchnorm", path, c.batchnorm);
  const std::string pool = get<std::string>(j, "dense_pool", path, "max");
  if (pool == "max") c.dense_pool = DensePool::kMax;
  else if (pool == "average") c.dense_pool = DensePool::kAverage;
  else throw ConfigError(path + ".dense_pool: unknown value '" + pool + "'");
  if (j.contains("dilations")) {
    const auto& d = j.at("dilations");
    if (!d.is_array() || d.size() != 2 || !d[0].is_number_unsigned() ||
        !d[1].is_number_unsigned()) {
      throw ConfigError(path + ".dilations must be two positive integers");
    }
    c.dilations = {d[0].get<std::size_t>(), d[1].get<std::size_t>()};
  }
  c.validate();
  return c;
}

json to_json(const NetworkConfig& c) {
  return {
      {"modalities", c.modalities},
      {"fusion", std::string(fusion_name(c.fusion))},
      {"module", std::string(variant_name(c.module))},
      {"base_width", c.base_width},
      {"depth", c.depth},
      {"height", c.height},
      {"width", c.width},
      {"num_classes", c.num_classes},
      {"batchnorm", c.batchnorm},
      {"dense_pool", std::string(dense_pool_name(c.dense_pool))},
      {"dilations", {c.dilations[0], c.dilations[1]}},
  };
}

void RunConfig::validate() const {
  network.validate();
  train.validate();
  if (network.num_classes != 2) {
    throw ConfigError("network.num_classes must be 2 for binary lesion training");
  }
}

RunConfig parse_run_config(const json& j) {
  require_object(j, "config");
  reject_unknown(j, "", {"seed", "network", "train", "data", "out"});
  RunConfig rc;
  rc.seed = get<std::uint64_t>(j, "seed", "", 0);
  if (j.contains("network")) rc.network = parse_network_config(j.at("network"));

  if (j.contains("train")) {
    const json& t = j.at("train");
    require_object(t, "train");
    reject_unknown(t, "train",
                   {"lr0", "decay_epoch", "decay_factor", "betas", "epsilon", "batch_size",
                    "epochs", "loss", "checkpoint_every"});
    TrainConfig& tc = rc.train;
    tc.lr0 = get<double>(t, "lr0", "train", tc.lr0);
    tc.decay_epoch = get<std::size_t>(t, "decay_epoch", "train", tc.decay_epoch);
    tc.decay_factor = get<double>(t, "decay_factor", "train", tc.decay_factor);
    if (t.contains("betas")) {
      const auto& b = t.at("betas");
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
        throw ConfigError("train.betas must be two numbers");
      }
      tc.beta1 = b[0].get<double>();
      tc.beta2 = b[1].get<double>();
    }
    tc.epsilon = get<double>(t, "epsilon", "train", tc.epsilon);
    tc.batch_size = get<std::size_t>(t, "batch_size", "train", tc.batch_size);
    tc.epochs = get<std::size_t>(t, "epochs", "train", tc.epochs);
    tc.loss = parse_loss(get<std::string>(t, "loss", "train", "cross_entropy"));
    tc.checkpoint_every = get<std::size_t>(t, "checkpoint_every", "train", 0);
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    require_object(d, "data");
    reject_unknown(d, "data", {"train", "val"});
    rc.train_data = get<std::string>(d, "train", "data", "");
    rc.val_data = get<std::string>(d, "val", "data", "");
  }
  rc.out_dir = get<std::string>(j, "out", "", "");
  rc.train.seed = rc.seed;
  rc.validate();
  return rc;
}

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& rc) {
  const TrainConfig& t = rc.train;
  json j = {
      {"seed", rc.seed},
      {"network", to_json(rc.network)},
      {"train",
       {
           {"lr0", t.lr0},
           {"decay_epoch", t.decay_epoch},
           {"decay_factor", t.decay_factor},
           {"betas", {t.beta1, t.beta2}},
           {"epsilon", t.epsilon},
           {"batch_size", t.batch_size},
           {"epochs", t.epochs},
           {"loss", std::string(loss_name(t.loss))},
           {"checkpoint_every", t.checkpoint_every},
       }},
  };
  if (!rc.train_data.empty() || !rc.val_data.empty()) {
    j["data"] = json::object();
    if (!rc.train_data.empty()) j["data"]["train"] = rc.train_data;
    if (!rc.val_data.empty()) j["data"]["val"] = rc.val_data;
  }
  if (!rc.out_dir.empty()) j["out"] = rc.out_dir;
  return j;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("MDU_SEED");
  if (!s || !*s) return std::nullopt;
  std::uint64_t v = 0;
  const char* end = s + std::char_traits<char>::length(s);
  const auto [ptr, ec] = std::from_chars(s, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError(std::string("MDU_SEED: not an unsigned integer: '") + s + "'");
  }
  return v;
}

}  // namespace mdu
