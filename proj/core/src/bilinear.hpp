// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace semvfi::detail {

// Bilinear footprint of a sample point after clamping it into
// [0, width-1] x [0, height-1].
template <typename T>
struct ClampedBilinear {
  int64_t x0, x1, y0, y1;
  T fx, fy;
  // False when the point was clamped along that axis; the coordinate
  // derivative is then zero.
  bool live_x, live_y;

  ClampedBilinear(T px, T py, int64_t width, int64_t height) {
    const T max_x = static_cast<T>(width - 1);
    const T max_y = static_cast<T>(height - 1);
    live_x = px >= T(0) && px <= max_x;
    live_y = py >= T(0) && py <= max_y;
    const T cx = std::clamp(px, T(0), max_x);
    const T cy = std::clamp(py, T(0), max_y);
    x0 = std::min(static_cast<int64_t>(std::floor(cx)), std::max<int64_t>(width - 2, 0));
    y0 = std::min(static_cast<int64_t>(std::floor(cy)), std::max<int64_t>(height - 2, 0));
    x1 = std::min(x0 + 1, width - 1);
    y1 = std::min(y0 + 1, height - 1);
    fx = cx - static_cast<T>(x0);
    fy = cy - static_cast<T>(y0);
  }

  T sample(const T* plane, int64_t width) const {
    const T v00 = plane[y0 * width + x0];
    const T v01 = plane[y0 * width + x1];
    const T v10 = plane[y1 * width + x0];
    const T v11 = plane[y1 * width + x1];
    return (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) + fy * ((T(1) - fx) * v10 + fx * v11);
  }

  // d sample / d px and d sample / d py.
  void coordinate_grad(const T* plane, int64_t width, T& dx, T& dy) const {
    const T v00 = plane[y0 * width + x0];
    const T v01 = plane[y0 * width + x1];
    const T v10 = plane[y1 * width + x0];
    const T v11 = plane[y1 * width + x1];
    dx = live_x ? (T(1) - fy) * (v01 - v00) + fy * (v11 - v10) : T(0);
    dy = live_y ? (T(1) - fx) * (v10 - v00) + fx * (v11 - v01) : T(0);
  }

  void scatter(T* plane, int64_t width, T grad) const {
    plane[y0 * width + x0] += grad * (T(1) - fy) * (T(1) - fx);
    plane[y0 * width + x1] += grad * (T(1) - fy) * fx;
    plane[y1 * width + x0] += grad * fy * (T(1) - fx);
    plane[y1 * width + x1] += grad * fy * fx;
  }
};

}  // namespace semvfi::detail
