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

#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tensor/graph.hpp"
#include "tensor/tensor.hpp"

namespace mdu {

enum class Init { kHeNormal, kZeros, kOnes };

// Owns every Parameter and batch-norm buffer of a model. Addresses are
// stable for the lifetime of the store. Parameters are initialised in
// creation order from one seeded stream, so a float and a double store
// built from the same seed hold the same values up to rounding.
template <typename T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed) : rng_(seed) {}

  Parameter<T>& create(const std::string& name, Shape shape, Init init,
                       std::size_t fan_in = 1);
  BatchNormStats<T>& create_stats(const std::string& name, std::size_t channels);

  std::vector<Parameter<T>*> parameters() const;
  struct NamedStats {
    std::string name;
    BatchNormStats<T>* stats;
  };
  std::vector<NamedStats> stats() const;

  Parameter<T>* find(const std::string& name) const;

  void zero_grad();
  std::size_t scalar_count() const;

 private:
  void claim(const std::string& name);

  std::mt19937_64 rng_;
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::vector<std::string> stats_names_;
  std::vector<std::unique_ptr<BatchNormStats<T>>> stats_;
  std::set<std::string> names_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace mdu
