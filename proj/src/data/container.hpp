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
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace mdu {

// Framing shared by case files and checkpoints: 4-byte magic, u16 version,
// u32 manifest length, JSON manifest, raw payload.
struct Container {
  std::uint16_t version = 0;
  nlohmann::json manifest;
  std::string_view payload;  // view into the decoded buffer
};

std::string encode_container(std::string_view magic, std::uint16_t version,
                             const nlohmann::json& manifest, std::string_view payload);
// Throws DataError for a wrong magic, unsupported version, short header or
// malformed manifest. `bytes` must outlive the returned payload view.
Container decode_container(const std::string& bytes, std::string_view magic,
                           const std::string& origin);

void append_f32_le(std::string& out, std::span<const float> values);
void read_f32_le(std::string_view in, std::span<float> out);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace mdu
