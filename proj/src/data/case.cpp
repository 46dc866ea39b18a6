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

#include "data/case.hpp"

#include <algorithm>

#include "data/container.hpp"
#include "tensor/errors.hpp"

namespace mdu {

std::array<std::size_t, 3> Case::shape() const {
  if (volumes.empty()) throw DataError("case '" + id + "' has no modality volumes");
  const Shape& s = volumes.front().shape();
  return {s.at(0), s.at(1), s.at(2)};
}

void Case::validate() const {
  if (modalities.size() != volumes.size()) {
    throw DataError("case '" + id + "' names " + std::to_string(modalities.size()) +
                    " modalities but holds " + std::to_string(volumes.size()) + " volumes");
  }
  const auto s = shape();
  for (std::size_t m = 0; m < volumes.size(); ++m) {
    if (volumes[m].shape() != Shape{s[0], s[1], s[2]}) {
      throw DataError("case '" + id + "' modality '" + modalities[m] + "' has shape " +
                      shape_string(volumes[m].shape()) + ", expected " +
                      shape_string(Shape{s[0], s[1], s[2]}));
    }
  }
  if (mask) {
    if (mask->size() != s[0] * s[1] * s[2]) {
      throw DataError("case '" + id + "' mask size does not match its volumes");
    }
    for (auto v : *mask) {
      if (v > 1) throw DataError("case '" + id + "' mask holds non-binary values");
    }
  }
  for (double sp : spacing) {
    if (!(sp > 0.0)) throw DataError("case '" + id + "' has non-positive spacing");
  }
}

SegmentationMask Case::mask_view() const {
  if (!mask) throw DataError("case '" + id + "' has no ground-truth mask");
  return SegmentationMask(shape(), *mask, spacing);
}

void require_modalities(const Case& c, const std::vector<std::string>& expected) {
  if (c.modalities == expected) return;
  const auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& m : v) s += (s.empty() ? "" : ",") + m;
    return "[" + s + "]";
  };
  throw DataError("case '" + c.id + "' has modalities " + join(c.modalities) +
                  " but the network expects " + join(expected));
}

Tensor<float> normalize(const Tensor<float>& volume) {
  const auto data = volume.data();
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  Tensor<float> out(volume.shape(), 0.0f);
  if (*hi <= *lo) return out;
  const double mn = *lo, range = double(*hi) - double(*lo);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = float((double(data[i]) - mn) / range);
  }
  return out;
}

void normalize_case(Case& c) {
  for (auto& v : c.volumes) v = normalize(v);
}

std::vector<SliceSample> slice_case(const Case& c) {
  c.validate();
  const auto [d, h, w] = c.shape();
  std::vector<SliceSample> out;
  for (std::size_t z = 0; z < d; ++z) {
    SliceSample s;
    s.case_id = c.id;
    s.slice = z;
    for (const auto& vol : c.volumes) {
      std::vector<float> plane(vol.raw() + z * h * w, vol.raw() + (z + 1) * h * w);
      s.modalities.emplace_back(Shape{1, 1, h, w}, std::move(plane));
    }
    s.label = Tensor<float>(Shape{h, w}, 0.0f);
    if (c.mask) {
      for (std::size_t i = 0; i < h * w; ++i) s.label[i] = float((*c.mask)[z * h * w + i]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Case stack_slices(std::span<const SliceSample> slices,
                  const std::vector<std::string>& modality_names,
                  std::array<double, 3> spacing) {
  if (slices.empty()) throw DataError("cannot stack an empty slice list");
  const std::size_t d = slices.size();
  const std::size_t h = slices[0].label.dim(0), w = slices[0].label.dim(1);
  Case c;
  c.id = slices[0].case_id;
  c.modalities = modality_names;
  c.spacing = spacing;
  for (std::size_t m = 0; m < modality_names.size(); ++m) {
    Tensor<float> vol(Shape{d, h, w});
    for (std::size_t z = 0; z < d; ++z) {
      const auto& plane = slices[z].modalities.at(m);
      std::copy_n(plane.raw(), h * w, vol.raw() + z * h * w);
    }
    c.volumes.push_back(std::move(vol));
  }
  std::vector<std::uint8_t> mask(d * h * w);
  for (std::size_t z = 0; z < d; ++z) {
    for (std::size_t i = 0; i < h * w; ++i) {
      mask[z * h * w + i] = slices[z].label[i] > 0.5f ? 1 : 0;
    }
  }
  c.mask = std::move(mask);
  return c;
}

std::string encode_case(const Case& c) {
  c.validate();
  const auto s = c.shape();
  nlohmann::json manifest = {
      {"case_id", c.id},
      {"modalities", c.modalities},
      {"shape", {s[0], s[1], s[2]}},
      {"spacing", {c.spacing[0], c.spacing[1], c.spacing[2]}},
      {"has_mask", c.mask.has_value()},
  };
  std::string payload;
  for (const auto& v : c.volumes) append_f32_le(payload, v.data());
  if (c.mask) payload.append(c.mask->begin(), c.mask->end());
  return encode_container(std::string_view(kCaseMagic, 4), kContainerVersion, manifest,
                          payload);
}

Case decode_case(const std::string& bytes, const std::string& origin) {
  const Container box = decode_container(bytes, std::string_view(kCaseMagic, 4), origin);
  Case c;
  std::array<std::size_t, 3> shape{};
  bool has_mask = false;
  try {
    const auto& m = box.manifest;
    c.id = m.at("case_id").get<std::string>();
    c.modalities = m.at("modalities").get<std::vector<std::string>>();
    const auto dims = m.at("shape").get<std::vector<std::size_t>>();
    const auto sp = m.at("spacing").get<std::vector<double>>();
    if (dims.size() != 3 || sp.size() != 3) {
      throw DataError(origin + ": manifest shape and spacing need 3 entries");
    }
    std::copy(dims.begin(), dims.end(), shape.begin());
    std::copy(sp.begin(), sp.end(), c.spacing.begin());
    has_mask = m.at("has_mask").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": invalid manifest: " + e.what());
  }
  const std::size_t voxels = shape[0] * shape[1] * shape[2];
  if (voxels == 0) throw DataError(origin + ": manifest shape has a zero extent");
  const std::size_t volume_bytes = 4 * voxels;
  const std::size_t mask_bytes = has_mask ? voxels : 0;
  const std::size_t expected = c.modalities.size() * volume_bytes + mask_bytes;
  const std::size_t got = box.payload.size();
  if (got != expected) {
    if (got >= mask_bytes && (got - mask_bytes) % volume_bytes == 0) {
      throw DataError(origin + ": manifest declares " + std::to_string(c.modalities.size()) +
                      " modalities but the payload holds " +
                      std::to_string((got - mask_bytes) / volume_bytes));
    }
    if (got < expected) {
      throw DataError(origin + ": truncated payload (" + std::to_string(got) + " of " +
                      std::to_string(expected) + " bytes)");
    }
    throw DataError(origin + ": " + std::to_string(got - expected) +
                    " trailing bytes after the payload");
  }
  for (std::size_t m = 0; m < c.modalities.size(); ++m) {
    Tensor<float> vol(Shape{shape[0], shape[1], shape[2]});
    read_f32_le(box.payload.substr(m * volume_bytes, volume_bytes), vol.data());
    c.volumes.push_back(std::move(vol));
  }
  if (has_mask) {
    const auto raw = box.payload.substr(c.modalities.size() * volume_bytes);
    c.mask = std::vector<std::uint8_t>(raw.begin(), raw.end());
  }
  c.validate();
  return c;
}

void save_case(const std::filesystem::path& path, const Case& c) {
  write_file(path, encode_case(c));
}

Case load_case(const std::filesystem::path& path) {
  return decode_case(read_file(path), path.string());
}

std::vector<Case> load_cases(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("'" + dir.string() + "' is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".mdt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Case> out;
  for (const auto& f : files) out.push_back(load_case(f));
  return out;
}

}  // namespace mdu
