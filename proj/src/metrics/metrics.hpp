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
#include <optional>
#include <string>
#include <vector>

namespace mdu {

// Binary voxel labelling, D×H×W (D = 1 for a 2D slice), with per-axis
// spacing in millimetres.
class SegmentationMask {
 public:
  using Extent = std::array<std::size_t, 3>;
  using Spacing = std::array<double, 3>;

  SegmentationMask(Extent shape, std::vector<std::uint8_t> voxels,
                   Spacing spacing = {1.0, 1.0, 1.0});
  static SegmentationMask slice(std::size_t h, std::size_t w,
                                std::vector<std::uint8_t> voxels,
                                Spacing spacing = {1.0, 1.0, 1.0});

  const Extent& shape() const { return shape_; }
  const Spacing& spacing() const { return spacing_; }
  const std::vector<std::uint8_t>& voxels() const { return voxels_; }
  bool at(std::size_t z, std::size_t y, std::size_t x) const {
    return voxels_[(z * shape_[1] + y) * shape_[2] + x] != 0;
  }
  std::size_t volume() const;
  bool is_2d() const { return shape_[0] == 1; }

 private:
  Extent shape_;
  std::vector<std::uint8_t> voxels_;
  Spacing spacing_;
};

// 2|A∩B| / (|A|+|B|); 1 when both masks are empty.
double dsc(const SegmentationMask& ref, const SegmentationMask& seg);

struct MhdOptions {
  double percentile = 95.0;
  // false: percentile of each directed distance set, then the max of the two.
  // true: one percentile over the union of both directed sets.
  bool pooled = false;
};

// Percentile-based Hausdorff distance between mask boundaries, in mm.
// Empty when either mask is empty (no boundary to measure).
std::optional<double> mhd(const SegmentationMask& ref, const SegmentationMask& seg,
                          MhdOptions options = {});

// 1 − ||A|−|B|| / (|A|+|B|); empty when both masks are empty.
std::optional<double> vs(const SegmentationMask& ref, const SegmentationMask& seg);

// Foreground voxels with a background face neighbour or on the image border
// (4-connectivity in 2D, 6-connectivity in 3D). Flat indices, ascending.
std::vector<std::size_t> boundary_voxels(const SegmentationMask& mask);

// Linear interpolation between order statistics; p in [0, 100].
double percentile(std::vector<double> values, double p);

struct CaseMetrics {
  std::string case_id;
  double dsc = 0.0;
  std::optional<double> mhd_mm;
  std::optional<double> vs;
};

CaseMetrics evaluate_case(std::string case_id, const SegmentationMask& ref,
                          const SegmentationMask& seg, MhdOptions options = {});

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

struct MetricsReport {
  std::vector<CaseMetrics> cases;
  MetricSummary dsc;
  std::optional<MetricSummary> mhd;
  std::optional<MetricSummary> vs;
  std::size_t mhd_failures = 0;
  std::size_t vs_failures = 0;

  // "case,dsc,mhd_mm,vs"; undefined values are written as "nan".
  std::string csv() const;
  // Mean ± std block, one line per metric.
  std::string summary(const std::string& label) const;
};

// Undefined MHD/VS values are excluded from their aggregates and counted.
// Throws ValueError on an empty record list.
MetricsReport aggregate(std::vector<CaseMetrics> records);

}  // namespace mdu
