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
#include <optional>
#include <string>

#include <json.hpp>

#include "network/config.hpp"
#include "train/trainer.hpp"

namespace mdu {

// Everything needed to reproduce a run. Serialised as manifest.json next
// to its outputs; the same schema is accepted as input config.
struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::string train_data;
  std::string val_data;
  std::string out_dir;

  void validate() const;
};

// Keys are optional and default as in NetworkConfig / TrainConfig; unknown
// keys and ill-typed values throw ConfigError naming the field path.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig parse_run_config_text(const std::string& text, const std::string& origin = "config");
nlohmann::json to_json(const RunConfig& rc);

NetworkConfig parse_network_config(const nlohmann::json& j, const std::string& path = "network");
nlohmann::json to_json(const NetworkConfig& cfg);

// MDU_SEED, when set, replaces the configured seed. Throws ConfigError on a
// malformed value.
std::optional<std::uint64_t> seed_from_env();

}  // namespace mdu
