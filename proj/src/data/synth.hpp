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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "data/case.hpp"

namespace mdu {

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t num_cases = 8;
  std::size_t height = 64;
  std::size_t width = 64;
  // Slices per case; 0 draws each case's depth from {2, 4}.
  std::size_t depth = 0;
  std::size_t num_modalities = 2;
  // Lesion visible only where the first two modalities are both bright;
  // each of them alone also shows distractor blobs of larger total area.
  bool conjunctive = true;
  // Index of the first generated case (ids and per-case seeds).
  std::size_t first_index = 0;
};

// Textured pseudo-modality volumes plus a lesion of one to three discs
// whose total area is drawn log-uniformly between 0.2% and 6% of a slice.
// Output intensities are raw; training normalises per modality and case.
// Bitwise deterministic in the options.
std::vector<Case> synth_dataset(const SynthOptions& options);

}  // namespace mdu
