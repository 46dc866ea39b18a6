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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metrics/metrics.hpp"
#include "tensor/tensor.hpp"

namespace mdu {

// One subject: co-registered D×H×W modality volumes, optional binary mask.
struct Case {
  std::string id;
  std::vector<std::string> modalities;
  std::vector<Tensor<float>> volumes;
  std::optional<std::vector<std::uint8_t>> mask;
  std::array<double, 3> spacing{1.0, 1.0, 1.0};

  std::array<std::size_t, 3> shape() const;
  // Throws DataError when modalities/volumes/mask disagree.
  void validate() const;
  SegmentationMask mask_view() const;
};

// Throws DataError unless the case carries exactly `expected`, in order.
void require_modalities(const Case& c, const std::vector<std::string>& expected);

// (x − min)/(max − min); a constant volume maps to zeros.
Tensor<float> normalize(const Tensor<float>& volume);
void normalize_case(Case& c);

// One 2D slice of a case: per-modality 1×1×H×W inputs and an H×W label.
struct SliceSample {
  std::vector<Tensor<float>> modalities;
  Tensor<float> label;
  std::string case_id;
  std::size_t slice = 0;
};

std::vector<SliceSample> slice_case(const Case& c);
// Inverse of slice_case for slices given in order.
Case stack_slices(std::span<const SliceSample> slices,
                  const std::vector<std::string>& modality_names,
                  std::array<double, 3> spacing);

// MDT container: "MDTC", u16 version, u32 manifest length, UTF-8 JSON
// manifest, float32 modality payloads in manifest order, then the optional
// mask as bytes. All integers little-endian.
inline constexpr char kCaseMagic[4] = {'M', 'D', 'T', 'C'};
inline constexpr std::uint16_t kContainerVersion = 1;

void save_case(const std::filesystem::path& path, const Case& c);
Case load_case(const std::filesystem::path& path);
std::string encode_case(const Case& c);
Case decode_case(const std::string& bytes, const std::string& origin = "<memory>");

// Every *.mdt file of a directory, ordered by file name.
std::vector<Case> load_cases(const std::filesystem::path& dir);

}  // namespace mdu
