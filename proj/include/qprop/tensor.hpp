// Copyright 2026 The qprop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "qprop/errors.hpp"

namespace qprop {

/// Dense order-r array over a d-dimensional index space, stored row-major.
/// Order 0 holds a single scalar.
struct Tensor {
  int order = 0;
  std::size_t dim = 1;
  std::vector<double> entries{0.0};

  Tensor() = default;
  Tensor(int order_, std::size_t dim_)
      : order(order_), dim(dim_), entries(count(order_, dim_), 0.0) {}

  static std::size_t count(int order, std::size_t dim) {
    std::size_t n = 1;
    for (int i = 0; i < order; ++i) n *= dim;
    return n;
  }

  std::size_t size() const { return entries.size(); }

  std::size_t flat(std::span<const std::size_t> index) const {
    std::size_t f = 0;
    for (std::size_t i : index) f = f * dim + i;
    return f;
  }

  double& at(std::span<const std::size_t> index) { return entries[flat(index)]; }
  double at(std::span<const std::size_t> index) const { return entries[flat(index)]; }

  /// Index vector of a flat position.
  std::vector<std::size_t> unflatten(std::size_t f) const {
    std::vector<std::size_t> index(static_cast<std::size_t>(order));
    for (int i = order - 1; i >= 0; --i) {
      index[static_cast<std::size_t>(i)] = f % dim;
      f /= dim;
    }
    return index;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : entries) m = std::max(m, std::abs(v));
    return m;
  }

  /// Largest difference between entries related by an index permutation.
  double asymmetry() const {
    double worst = 0.0;
    for (std::size_t f = 0; f < entries.size(); ++f) {
      auto idx = unflatten(f);
      for (std::size_t a = 0; a + 1 < idx.size(); ++a) {
        auto swapped = idx;
        std::swap(swapped[a], swapped[a + 1]);
        worst = std::max(worst, std::abs(entries[f] - at(swapped)));
      }
    }
    return worst;
  }
};

}  // namespace qprop
