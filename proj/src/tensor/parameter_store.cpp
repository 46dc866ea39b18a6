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

#include "tensor/parameter_store.hpp"

#include <cmath>

namespace mdu {

template <typename T>
void ParameterStore<T>::claim(const std::string& name) {
  if (!names_.insert(name).second) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
}

template <typename T>
Parameter<T>& ParameterStore<T>::create(const std::string& name, Shape shape,
                                        Init init, std::size_t fan_in) {
  claim(name);
  Tensor<T> value(std::move(shape));
  switch (init) {
    case Init::kHeNormal: {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / double(fan_in)));
      for (auto& v : value.data()) v = T(normal(rng_));
      break;
    }
    case Init::kZeros:
      break;
    case Init::kOnes:
      value.fill(T{1});
      break;
  }
  params_.push_back(std::make_unique<Parameter<T>>(name, std::move(value)));
  return *params_.back();
}

template <typename T>
BatchNormStats<T>& ParameterStore<T>::create_stats(const std::string& name,
                                                   std::size_t channels) {
  claim(name);
  stats_names_.push_back(name);
  stats_.push_back(std::make_unique<BatchNormStats<T>>(channels));
  return *stats_.back();
}

template <typename T>
std::vector<Parameter<T>*> ParameterStore<T>::parameters() const {
  std::vector<Parameter<T>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::vector<typename ParameterStore<T>::NamedStats> ParameterStore<T>::stats() const {
  std::vector<NamedStats> out;
  for (std::size_t i = 0; i < stats_.size(); ++i) {
    out.push_back({stats_names_[i], stats_[i].get()});
  }
  return out;
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace mdu
