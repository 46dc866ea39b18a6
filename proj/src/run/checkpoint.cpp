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

#include "run/checkpoint.hpp"

#include "data/container.hpp"
#include "run/run_config.hpp"
#include "tensor/errors.hpp"

namespace mdu {

namespace {
constexpr std::uint16_t kCheckpointVersion = 1;
}

std::string encode_checkpoint(const Network<float>& net, std::uint64_t seed, std::size_t epoch) {
  nlohmann::json params = nlohmann::json::array();
  nlohmann::json buffers = nlohmann::json::array();
  std::string payload;
  for (const auto* p : net.store().parameters()) {
    params.push_back({{"name", p->name}, {"shape", p->value.shape()}});
    append_f32_le(payload, p->value.data());
  }
  for (const auto& s : net.store().stats()) {
    buffers.push_back({{"name", s.name}, {"channels", s.stats->running_mean.size()}});
    append_f32_le(payload, s.stats->running_mean.data());
    append_f32_le(payload, s.stats->running_var.data());
  }
  const nlohmann::json manifest = {
      {"network", to_json(net.config())},
      {"seed", seed},
      {"epoch", epoch},
      {"parameters", params},
      {"buffers", buffers},
  };
  return encode_container(std::string_view(kCheckpointMagic, 4), kCheckpointVersion, manifest,
                          payload);
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin) {
  const Container box =
      decode_container(bytes, std::string_view(kCheckpointMagic, 4), origin);
  Checkpoint ck;
  NetworkConfig cfg;
  nlohmann::json params, buffers;
  try {
    cfg = parse_network_config(box.manifest.at("network"));
    ck.seed = box.manifest.at("seed").get<std::uint64_t>();
    ck.epoch = box.manifest.at("epoch").get<std::size_t>();
    params = box.manifest.at("parameters");
    buffers = box.manifest.at("buffers");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": invalid checkpoint manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(origin + ": invalid network in checkpoint: " + e.what());
  }
  ck.network = std::make_unique<Network<float>>(cfg, ck.seed);
  auto& store = ck.network->store();
  const auto own_params = store.parameters();
  const auto own_stats = store.stats();
  if (params.size() != own_params.size() || buffers.size() != own_stats.size()) {
    throw DataError(origin + ": checkpoint lists " + std::to_string(params.size()) +
                    " parameters, the network has " + std::to_string(own_params.size()));
  }
  std::size_t offset = 0;
  const auto take = [&](std::span<float> out) {
    const std::size_t n = 4 * out.size();
    if (offset + n > box.payload.size()) throw DataError(origin + ": truncated payload");
    read_f32_le(box.payload.substr(offset, n), out);
    offset += n;
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = own_params[i];
    const auto name = params[i].value("name", std::string{});
    const auto shape = params[i].value("shape", Shape{});
    if (name != p->name || shape != p->value.shape()) {
      throw DataError(origin + ": parameter " + std::to_string(i) + " is '" + name + "' " +
                      shape_string(shape) + ", expected '" + p->name + "' " +
                      shape_string(p->value.shape()));
    }
    take(p->value.data());
  }
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    const auto& s = own_stats[i];
    if (buffers[i].value("name", std::string{}) != s.name ||
        buffers[i].value("channels", std::size_t{0}) != s.stats->running_mean.size()) {
      throw DataError(origin + ": buffer " + std::to_string(i) + " does not match '" + s.name +
                      "'");
    }
    take(s.stats->running_mean.data());
    take(s.stats->running_var.data());
  }
  if (offset != box.payload.size()) {
    throw DataError(origin + ": " + std::to_string(box.payload.size() - offset) +
                    " trailing bytes after the payload");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net,
                     std::uint64_t seed, std::size_t epoch) {
  write_file(path, encode_checkpoint(net, seed, epoch));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

}  // namespace mdu
