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

#include "train/adam.hpp"

#include <cmath>

namespace mdu {

template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamMoments<T>& state,
               std::size_t t, double lr, const AdamHyper& hyper) {
  if (grad.size() != param.size() || state.m.size() != param.size() ||
      state.v.size() != param.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment sizes differ (" +
                     std::to_string(param.size()) + ", " + std::to_string(grad.size()) +
                     ", " + std::to_string(state.m.size()) + ")");
  }
  if (t == 0) throw ValueError("adam_step: step index starts at 1");
  const double b1 = hyper.beta1, b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, double(t));
  const double c2 = 1.0 - std::pow(b2, double(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * double(state.m[i]) + (1.0 - b1) * g;
    const double v = b2 * double(state.v[i]) + (1.0 - b2) * g * g;
    state.m[i] = T(m);
    state.v[i] = T(v);
    const double mhat = m / c1;
    const double vhat = v / c2;
    param[i] = T(double(param[i]) - lr * mhat / (std::sqrt(vhat) + hyper.epsilon));
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamHyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
  for (auto* p : params_) state_.emplace_back(p->value.size());
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step<T>(params_[i]->value.data(), params_[i]->grad.data(), state_[i], t_, lr, hyper_);
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamMoments<float>&,
                               std::size_t, double, const AdamHyper&);
template void adam_step<double>(std::span<double>, std::span<const double>,
                                AdamMoments<double>&, std::size_t, double, const AdamHyper&);
template class Adam<float>;
template class Adam<double>;

}  // namespace mdu
