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
#include <filesystem>
#include <memory>
#include <string>

#include "network/network.hpp"

namespace mdu {

// Checkpoint: the case-file framing with magic "MDTP". The manifest holds
// the network config, seed, epoch and the ordered parameter and buffer
// names with shapes; the payload is float32 LE values in that order, each
// batch-norm buffer as running mean then running variance.
inline constexpr char kCheckpointMagic[4] = {'M', 'D', 'T', 'P'};

struct Checkpoint {
  std::unique_ptr<Network<float>> network;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
};

std::string encode_checkpoint(const Network<float>& net, std::uint64_t seed, std::size_t epoch);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net,
                     std::uint64_t seed, std::size_t epoch);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mdu
