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
#include <string>
#include <vector>

namespace mdu {

inline constexpr double kOpGradTolerance = 1e-6;
inline constexpr double kNetworkGradTolerance = 1e-4;

struct GradcheckResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  bool passed = false;

  std::string line() const;
};

// Op names accepted by gradcheck_op, in report order.
const std::vector<std::string>& gradcheck_ops();

// Compares reverse-mode gradients of every input coordinate with central
// differences (step 1e-5) in double precision over `instances` random
// instances. The scalar under test is a random weighting of the op output.
// Relative error is |a − n| / max(|a|, |n|, 1e-3·max|n|, 1e-12) where the
// max runs over the instance. Unknown names throw ConfigError.
GradcheckResult gradcheck_op(const std::string& name, std::uint64_t seed = 0,
                             std::size_t instances = 20);

// Cross-entropy of a hyper-dense network (2 modalities, 16×16, base width
// 4, depth 2, batch 2, batch norm in training mode) against sampled
// coordinates of every parameter tensor. The relative-error floor uses the
// largest numerical gradient over all sampled coordinates.
GradcheckResult gradcheck_full_network_small(std::uint64_t seed = 0,
                                             std::size_t coords_per_tensor = 10);

}  // namespace mdu
