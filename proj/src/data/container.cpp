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

#include "data/container.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "tensor/errors.hpp"

namespace mdu {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xFF));
  out.push_back(char(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

}  // namespace

std::string encode_container(std::string_view magic, std::uint16_t version,
                             const nlohmann::json& manifest, std::string_view payload) {
  const std::string text = manifest.dump();
  std::string out;
  out.reserve(10 + text.size() + payload.size());
  out.append(magic);
  put_u16(out, version);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  out.append(payload);
  return out;
}

Container decode_container(const std::string& bytes, std::string_view magic,
                           const std::string& origin) {
  if (bytes.size() < 4 || std::string_view(bytes).substr(0, 4) != magic) {
    throw DataError(origin + ": bad magic, expected '" + std::string(magic) + "'");
  }
  if (bytes.size() < 10) throw DataError(origin + ": truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  Container c;
  c.version = std::uint16_t(p[4] | p[5] << 8);
  if (c.version != 1) {
    throw DataError(origin + ": unsupported format version " + std::to_string(c.version));
  }
  const std::uint32_t len = get_u32(p + 6);
  if (bytes.size() - 10 < len) throw DataError(origin + ": truncated manifest");
  try {
    c.manifest = nlohmann::json::parse(bytes.begin() + 10, bytes.begin() + 10 + len);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": malformed manifest: " + e.what());
  }
  c.payload = std::string_view(bytes).substr(10 + len);
  return c;
}

void append_f32_le(std::string& out, std::span<const float> values) {
  const std::size_t start = out.size();
  out.resize(start + 4 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[start + 4 * i + b] = char((bits >> (8 * b)) & 0xFF);
  }
}

void read_f32_le(std::string_view in, std::span<float> out) {
  const auto* p = reinterpret_cast<const unsigned char*>(in.data());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

}  // namespace mdu
