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
#include <span>
#include <vector>

#include "tensor/tensor.hpp"

namespace mdu {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

// First and second moment estimates of one parameter tensor.
template <typename T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;

  explicit AdamMoments(std::size_t n = 0) : m(n, T{0}), v(n, T{0}) {}
};

// One bias-corrected Adam update at step `t` (1-based). Throws ShapeError
// when the gradient or the moments do not match the parameter.
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state,
               std::size_t t, double lr, const AdamHyper& hyper = {});

// Adam over every parameter of a store-like list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamHyper hyper);

  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<AdamMoments<T>> state_;
  AdamHyper hyper_;
  std::size_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace mdu
