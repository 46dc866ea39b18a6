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

#include "data/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>

#include "tensor/errors.hpp"

namespace mdu {

namespace {

struct Disc {
  double cy, cx, r;

  bool contains(std::size_t y, std::size_t x) const {
    const double dy = double(y) - cy, dx = double(x) - cx;
    return dy * dy + dx * dx <= r * r;
  }
};

constexpr double kMinLesionFraction = 0.002;
constexpr double kMaxLesionFraction = 0.06;
constexpr double kMinBlobArea = 6.0;
constexpr double kDiscGap = 2.0;

class CaseGenerator {
 public:
  CaseGenerator(const SynthOptions& opt, std::size_t index)
      : opt_(opt) {
    std::seed_seq seq{std::uint32_t(opt.seed), std::uint32_t(opt.seed >> 32),
                      std::uint32_t(index), std::uint32_t(index >> 32)};
    rng_.seed(seq);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  std::size_t pick(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  // Splits `area` over up to `count` blobs of at least kMinBlobArea each.
  std::vector<double> split(double area, std::size_t count) {
    while (count > 1 && area / double(count) < kMinBlobArea) --count;
    std::vector<double> w(count);
    double total = 0;
    for (auto& v : w) total += (v = uniform(0.2, 1.0));
    for (auto& v : w) v = std::max(kMinBlobArea, area * v / total);
    return w;
  }

  // Places discs of the given areas clear of `taken`; nullopt when the
  // rejection sampler gives up.
  std::optional<std::vector<Disc>> place(const std::vector<double>& areas,
                                         std::vector<Disc>& taken) {
    std::vector<Disc> placed;
    const double h = double(opt_.height), w = double(opt_.width);
    for (double area : areas) {
      const double r = std::sqrt(area / std::numbers::pi);
      if (2 * r + 2 >= std::min(h, w)) return std::nullopt;
      bool ok = false;
      for (int attempt = 0; attempt < 400 && !ok; ++attempt) {
        const Disc d{uniform(r + 1, h - 2 - r), uniform(r + 1, w - 2 - r), r};
        ok = true;
        for (const auto& t : taken) {
          const double dist = std::hypot(d.cy - t.cy, d.cx - t.cx);
          if (dist < d.r + t.r + kDiscGap) {
            ok = false;
            break;
          }
        }
        if (ok) {
          taken.push_back(d);
          placed.push_back(d);
        }
      }
      if (!ok) return std::nullopt;
    }
    return placed;
  }

  Case generate(std::size_t index) {
    const std::size_t depth = opt_.depth ? opt_.depth : (pick(0, 1) ? 4 : 2);
    const double pixels = double(opt_.height * opt_.width);
    const std::size_t n = opt_.num_modalities;
    std::vector<Disc> lesion;
    std::vector<std::vector<Disc>> distractors(n);
    for (;;) {
      std::vector<Disc> taken;
      const double frac = std::exp(uniform(std::log(kMinLesionFraction),
                                           std::log(kMaxLesionFraction)));
      const double lesion_area = frac * pixels;
      auto les = place(split(lesion_area, pick(1, 3)), taken);
      if (!les) continue;
      bool ok = true;
      for (std::size_t m = 0; m < n && ok; ++m) {
        double ratio;
        if (opt_.conjunctive) {
          ratio = m < 2 ? uniform(1.6, 2.0) : uniform(0.5, 1.0);
        } else {
          ratio = uniform(0.3, 0.6);
        }
        std::vector<Disc> scratch = taken;
        // distractors of the first two modalities must not meet each other
        auto& pool = (opt_.conjunctive && m < 2) ? taken : scratch;
        auto d = place(split(ratio * lesion_area, pick(1, 3)), pool);
        if (!d) ok = false;
        else distractors[m] = *d;
      }
      if (!ok) continue;
      lesion = *les;
      break;
    }

    Case c;
    char id[32];
    std::snprintf(id, sizeof id, "case%04zu", index);
    c.id = id;
    c.modalities = n == 4 ? std::vector<std::string>{"CBV", "CTP", "DWI", "MTT"}
                          : std::vector<std::string>{};
    for (std::size_t m = c.modalities.size(); m < n; ++m) {
      c.modalities.push_back("M" + std::to_string(m + 1));
    }
    const std::size_t h = opt_.height, w = opt_.width;
    std::vector<std::uint8_t> mask(depth * h * w, 0);
    for (std::size_t z = 0; z < depth; ++z) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          for (const auto& d : lesion) {
            if (d.contains(y, x)) mask[(z * h + y) * w + x] = 1;
          }
        }
      }
    }

    std::normal_distribution<double> noise(0.0, 0.05);
    for (std::size_t m = 0; m < n; ++m) {
      const bool shows_lesion = !opt_.conjunctive || m < 2;
      // one amplitude for lesion and distractors alike within a modality
      const double amp = uniform(0.8, 1.2);
      std::vector<Disc> bright = distractors[m];
      if (shows_lesion) bright.insert(bright.end(), lesion.begin(), lesion.end());
      const double fy1 = uniform(0.02, 0.2), fx1 = uniform(0.02, 0.2), p1 = uniform(0, 6.3);
      const double fy2 = uniform(0.02, 0.2), fx2 = uniform(0.02, 0.2), p2 = uniform(0, 6.3);
      const double offset = uniform(0.0, 2.0), scale = uniform(0.5, 3.0);
      Tensor<float> vol(Shape{depth, h, w});
      for (std::size_t z = 0; z < depth; ++z) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            double v = 0.1 * std::sin(fy1 * double(y) + fx1 * double(x) + p1 + 0.3 * double(z)) +
                       0.1 * std::sin(fy2 * double(y) - fx2 * double(x) + p2);
            // bright discs are flat plateaus over the texture
            for (const auto& d : bright) {
              if (d.contains(y, x)) v = amp;
            }
            v += noise(rng_);
            vol[(z * h + y) * w + x] = float(offset + scale * v);
          }
        }
      }
      c.volumes.push_back(std::move(vol));
    }
    c.mask = std::move(mask);
    return c;
  }

 private:
  const SynthOptions& opt_;
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<Case> synth_dataset(const SynthOptions& options) {
  if (options.height < 16 || options.width < 16 || options.height % 16 ||
      options.width % 16) {
    throw ConfigError("synthetic slices must be at least 16 and divisible by 16, got " +
                      std::to_string(options.height) + "x" + std::to_string(options.width));
  }
  if (options.num_modalities == 0) throw ConfigError("synthetic data needs >= 1 modality");
  if (options.conjunctive && options.num_modalities < 2) {
    throw ConfigError("conjunctive synthetic data needs >= 2 modalities");
  }
  std::vector<Case> out;
  for (std::size_t i = 0; i < options.num_cases; ++i) {
    const std::size_t index = options.first_index + i;
    out.push_back(CaseGenerator(options, index).generate(index));
  }
  return out;
}

}  // namespace mdu
