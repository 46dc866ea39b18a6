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

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "tensor/errors.hpp"

namespace mdu {

SegmentationMask::SegmentationMask(Extent shape, std::vector<std::uint8_t> voxels,
                                   Spacing spacing)
    : shape_(shape), voxels_(std::move(voxels)), spacing_(spacing) {
  if (shape_[0] == 0 || shape_[1] == 0 || shape_[2] == 0) {
    throw ShapeError("mask extents must be >= 1");
  }
  if (voxels_.size() != shape_[0] * shape_[1] * shape_[2]) {
    throw ShapeError("mask voxel count " + std::to_string(voxels_.size()) +
                     " does not match its shape");
  }
  for (auto v : voxels_) {
    if (v > 1) throw ValueError("mask values must be 0 or 1, got " + std::to_string(v));
  }
  for (double s : spacing_) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ValueError("mask spacing must be strictly positive");
    }
  }
}

SegmentationMask SegmentationMask::slice(std::size_t h, std::size_t w,
                                         std::vector<std::uint8_t> voxels,
                                         Spacing spacing) {
  return SegmentationMask({1, h, w}, std::move(voxels), spacing);
}

std::size_t SegmentationMask::volume() const {
  return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), 1));
}

namespace {

void require_same_shape(const SegmentationMask& a, const SegmentationMask& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("metric inputs have different shapes");
  }
}

// One pass of the lower-envelope squared distance transform along a line.
// `f` holds squared distances (inf for no site); `w` is spacing².
void edt_line(std::vector<double>& f, double w, std::vector<double>& out,
              std::vector<std::size_t>& v, std::vector<double>& z) {
  const std::size_t n = f.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::ptrdiff_t k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    double s = -inf;
    while (k >= 0) {
      const double vq = double(v[k]);
      s = ((f[q] + w * double(q) * double(q)) - (f[v[k]] + w * vq * vq)) /
          (2.0 * w * (double(q) - vq));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -inf : s;
    z[k + 1] = inf;
  }
  out.assign(n, inf);
  if (k < 0) return;
  std::ptrdiff_t j = 0;
  for (std::size_t p = 0; p < n; ++p) {
    while (z[j + 1] < double(p)) ++j;
    const double d = double(p) - double(v[j]);
    out[p] = w * d * d + f[v[j]];
  }
}

// Squared Euclidean distance (mm²) from every voxel to the nearest site.
std::vector<double> squared_distance_map(const std::vector<std::size_t>& sites,
                                         const SegmentationMask::Extent& shape,
                                         const SegmentationMask::Spacing& spacing) {
  const std::size_t nz = shape[0], ny = shape[1], nx = shape[2];
  std::vector<double> dist(nz * ny * nx, std::numeric_limits<double>::infinity());
  for (std::size_t idx : sites) dist[idx] = 0.0;
  std::vector<double> line, out, z;
  std::vector<std::size_t> v;
  const std::size_t strides[3] = {ny * nx, nx, 1};
  for (int axis = 2; axis >= 0; --axis) {
    const std::size_t n = shape[axis];
    const double w = spacing[axis] * spacing[axis];
    const std::size_t stride = strides[axis];
    for (std::size_t base = 0; base < dist.size(); ++base) {
      // visit each line once: its first element has coordinate 0 on `axis`
      if ((base / stride) % n != 0) continue;
      line.resize(n);
      for (std::size_t i = 0; i < n; ++i) line[i] = dist[base + i * stride];
      edt_line(line, w, out, v, z);
      for (std::size_t i = 0; i < n; ++i) dist[base + i * stride] = out[i];
    }
  }
  return dist;
}

}  // namespace

double dsc(const SegmentationMask& ref, const SegmentationMask& seg) {
  require_same_shape(ref, seg);
  std::size_t a = 0, b = 0, both = 0;
  const auto& rv = ref.voxels();
  const auto& sv = seg.voxels();
  for (std::size_t i = 0; i < rv.size(); ++i) {
    a += rv[i];
    b += sv[i];
    both += rv[i] & sv[i];
  }
  if (a + b == 0) return 1.0;
  return 2.0 * double(both) / double(a + b);
}

std::optional<double> vs(const SegmentationMask& ref, const SegmentationMask& seg) {
  require_same_shape(ref, seg);
  const double a = double(ref.volume());
  const double b = double(seg.volume());
  if (a + b == 0.0) return std::nullopt;
  return 1.0 - std::abs(a - b) / (a + b);
}

std::vector<std::size_t> boundary_voxels(const SegmentationMask& mask) {
  const auto [nz, ny, nx] = mask.shape();
  const bool three_d = !mask.is_2d();
  std::vector<std::size_t> out;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        if (!mask.at(z, y, x)) continue;
        bool edge = y == 0 || y + 1 == ny || x == 0 || x + 1 == nx ||
                    !mask.at(z, y - 1, x) || !mask.at(z, y + 1, x) ||
                    !mask.at(z, y, x - 1) || !mask.at(z, y, x + 1);
        if (three_d && !edge) {
          edge = z == 0 || z + 1 == nz || !mask.at(z - 1, y, x) || !mask.at(z + 1, y, x);
        }
        if (edge) out.push_back((z * ny + y) * nx + x);
      }
    }
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValueError("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw ValueError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - double(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::optional<double> mhd(const SegmentationMask& ref, const SegmentationMask& seg,
                          MhdOptions options) {
  require_same_shape(ref, seg);
  const auto pref = boundary_voxels(ref);
  const auto pseg = boundary_voxels(seg);
  if (pref.empty() || pseg.empty()) return std::nullopt;
  const auto to_seg = squared_distance_map(pseg, seg.shape(), seg.spacing());
  const auto to_ref = squared_distance_map(pref, ref.shape(), ref.spacing());
  std::vector<double> forward, backward;
  forward.reserve(pref.size());
  backward.reserve(pseg.size());
  for (std::size_t idx : pref) forward.push_back(std::sqrt(to_seg[idx]));
  for (std::size_t idx : pseg) backward.push_back(std::sqrt(to_ref[idx]));
  if (options.pooled) {
    forward.insert(forward.end(), backward.begin(), backward.end());
    return percentile(std::move(forward), options.percentile);
  }
  return std::max(percentile(std::move(forward), options.percentile),
                  percentile(std::move(backward), options.percentile));
}

CaseMetrics evaluate_case(std::string case_id, const SegmentationMask& ref,
                          const SegmentationMask& seg, MhdOptions options) {
  CaseMetrics m;
  m.case_id = std::move(case_id);
  m.dsc = dsc(ref, seg);
  m.mhd_mm = mhd(ref, seg, options);
  m.vs = vs(ref, seg);
  return m;
}

namespace {

// Welford running mean / population variance.
class RunningStats {
 public:
  void push(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / double(n_);
    m2_ += delta * (x - mean_);
  }
  MetricSummary summary() const {
    return {mean_, n_ ? std::sqrt(std::max(0.0, m2_ / double(n_))) : 0.0, n_};
  }
  std::size_t count() const { return n_; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

std::string format_value(const std::optional<double>& v) {
  if (!v) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

MetricsReport aggregate(std::vector<CaseMetrics> records) {
  if (records.empty()) throw ValueError("cannot aggregate an empty record list");
  RunningStats d, h, v;
  MetricsReport report;
  for (const auto& r : records) {
    d.push(r.dsc);
    if (r.mhd_mm) {
      h.push(*r.mhd_mm);
    } else {
      ++report.mhd_failures;
    }
    if (r.vs) {
      v.push(*r.vs);
    } else {
      ++report.vs_failures;
    }
  }
  report.dsc = d.summary();
  if (h.count()) report.mhd = h.summary();
  if (v.count()) report.vs = v.summary();
  report.cases = std::move(records);
  return report;
}

std::string MetricsReport::csv() const {
  std::ostringstream out;
  out << "case,dsc,mhd_mm,vs\n";
  for (const auto& c : cases) {
    out << c.case_id << ',' << format_value(c.dsc) << ',' << format_value(c.mhd_mm)
        << ',' << format_value(c.vs) << '\n';
  }
  return out.str();
}

std::string MetricsReport::summary(const std::string& label) const {
  const auto line = [](const std::optional<MetricSummary>& s, int digits) {
    if (!s) return std::string("undefined");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, s->mean, digits, s->stddev);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "Architecture: " << label << "  (" << cases.size() << " cases)\n";
  out << "  DSC      " << line(dsc, 3) << '\n';
  out << "  MHD (mm) " << line(mhd, 2);
  if (mhd_failures) out << "  [" << mhd_failures << " undefined]";
  out << '\n';
  out << "  VS       " << line(vs, 3);
  if (vs_failures) out << "  [" << vs_failures << " undefined]";
  out << '\n';
  return out.str();
}

}  // namespace mdu
