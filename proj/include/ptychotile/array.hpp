// Copyright 2026 The ptychotile Authors.
// SPDX-License-Identifier: Apache-2.0
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
//
#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "ptychotile/error.hpp"
#include "ptychotile/geometry.hpp"

namespace ptychotile {

using Complex = std::complex<double>;

/// Dense row-major 2D array.
template <typename T>
class Array2 {
 public:
  Array2() = default;
  Array2(int rows, int cols, T fill = T{})
      : rows_(rows),
        cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int y, int x) {
    return data_[static_cast<std::size_t>(y) * cols_ + x];
  }
  const T& operator()(int y, int x) const {
    return data_[static_cast<std::size_t>(y) * cols_ + x];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Array2&, const Array2&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using ComplexField = Array2<Complex>;

/// Real 3D array (slices x rows x cols) that covers `region` of the global
/// lateral plane. Element access uses global voxel coordinates.
class RegionArray {
 public:
  RegionArray() = default;
  RegionArray(int slices, Rect region, double fill = 0.0)
      : slices_(slices),
        region_(region),
        data_(static_cast<std::size_t>(slices) *
                  static_cast<std::size_t>(region.area()),
              fill) {}

  int slices() const { return slices_; }
  const Rect& region() const { return region_; }
  std::size_t size() const { return data_.size(); }

  std::size_t offset(int s, int y, int x) const {
    return (static_cast<std::size_t>(s) * region_.height() +
            static_cast<std::size_t>(y - region_.y0)) *
               region_.width() +
           static_cast<std::size_t>(x - region_.x0);
  }
  double& at(int s, int y, int x) { return data_[offset(s, y, x)]; }
  double at(int s, int y, int x) const { return data_[offset(s, y, x)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  /// Copy of the sub-rectangle `sub`, which must lie inside region().
  RegionArray extract(const Rect& sub) const {
    if (!region_.contains(sub)) {
      throw ShapeMismatch("extract outside array region");
    }
    RegionArray out(slices_, sub);
    for (int s = 0; s < slices_; ++s) {
      for (int y = sub.y0; y < sub.y1; ++y) {
        const double* src = &data_[offset(s, y, sub.x0)];
        std::copy(src, src + sub.width(), &out.at(s, y, sub.x0));
      }
    }
    return out;
  }

  /// this += src on the intersection of both regions.
  void add(const RegionArray& src) { combine(src, /*replace=*/false); }
  /// this := src on the intersection of both regions.
  void assign(const RegionArray& src) { combine(src, /*replace=*/true); }

  friend bool operator==(const RegionArray&, const RegionArray&) = default;

 private:
  void combine(const RegionArray& src, bool replace) {
    if (src.slices_ != slices_) throw ShapeMismatch("slice count differs");
    const Rect r = region_.intersect(src.region_);
    for (int s = 0; s < slices_; ++s) {
      for (int y = r.y0; y < r.y1; ++y) {
        const double* in = &src.data_[src.offset(s, y, r.x0)];
        double* out = &data_[offset(s, y, r.x0)];
        if (replace) {
          std::copy(in, in + r.width(), out);
        } else {
          for (int i = 0; i < r.width(); ++i) out[i] += in[i];
        }
      }
    }
  }

  int slices_ = 0;
  Rect region_;
  std::vector<double> data_;
};

}  // namespace ptychotile
