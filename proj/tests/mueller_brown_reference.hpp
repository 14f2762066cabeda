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

#include "qprop/oracles.hpp"

namespace qprop::testing_support {

// Reference global minimum of the Mueller-Brown surface: 400 x 400 scan of
// the sampling box, then Newton polish with central differences.
inline double mueller_brown_reference(const Box& box) {
  const double A[] = {-200, -100, -170, 15}, a[] = {-1, -1, -6.5, 0.7}, b[] = {0, 0, 11, 0.6},
               c[] = {-10, -10, -6.5, 0.7}, x0[] = {1, 0, -0.5, -1}, y0[] = {0, 0.5, 1.5, 1};
  auto E = [&](double x, double y) {
    double e = 0;
    for (int i = 0; i < 4; ++i) {
      const double dx = x - x0[i], dy = y - y0[i];
      e += A[i] * std::exp(a[i] * dx * dx + b[i] * dx * dy + c[i] * dy * dy);
    }
    return e;
  };
  double bx = 0, by = 0, be = INFINITY;
  for (int i = 0; i < 400; ++i) {
    for (int j = 0; j < 400; ++j) {
      const double x = box.lo[0] + (box.hi[0] - box.lo[0]) * i / 399.0;
      const double y = box.lo[1] + (box.hi[1] - box.lo[1]) * j / 399.0;
      const double e = E(x, y);
      if (e < be) {
        be = e;
        bx = x;
        by = y;
      }
    }
  }
  const double h = 1e-4;
  for (int it = 0; it < 20; ++it) {
    const double gx = (E(bx + h, by) - E(bx - h, by)) / (2 * h);
    const double gy = (E(bx, by + h) - E(bx, by - h)) / (2 * h);
    const double hxx = (E(bx + h, by) - 2 * E(bx, by) + E(bx - h, by)) / (h * h);
    const double hyy = (E(bx, by + h) - 2 * E(bx, by) + E(bx, by - h)) / (h * h);
    const double hxy = (E(bx + h, by + h) - E(bx + h, by - h) - E(bx - h, by + h) + E(bx - h, by - h)) / (4 * h * h);
    const double det = hxx * hyy - hxy * hxy;
    bx -= (hyy * gx - hxy * gy) / det;
    by -= (hxx * gy - hxy * gx) / det;
  }
  return E(bx, by);
}

}  // namespace qprop::testing_support
