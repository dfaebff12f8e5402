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

/// \file geometry.hpp
/// Scan patterns, mesh decomposition into halo-extended tiles and
/// integer rectangle arithmetic. All coordinates are voxel indices in the
/// lateral (y, x) plane; rectangles are half-open.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace ptychotile {

struct Extent {
  int height = 0;
  int width = 0;

  friend bool operator==(const Extent&, const Extent&) = default;
};

struct Point {
  int y = 0;
  int x = 0;
};

/// Half-open rectangle [y0, y1) x [x0, x1).
struct Rect {
  int y0 = 0;
  int x0 = 0;
  int y1 = 0;
  int x1 = 0;

  static Rect of(Extent e) { return {0, 0, e.height, e.width}; }

  int height() const { return std::max(0, y1 - y0); }
  int width() const { return std::max(0, x1 - x0); }
  std::int64_t area() const {
    return static_cast<std::int64_t>(height()) * width();
  }
  bool empty() const { return area() == 0; }

  bool contains(int y, int x) const {
    return y >= y0 && y < y1 && x >= x0 && x < x1;
  }
  /// True if `inner` lies inside this rectangle. Empty rectangles are
  /// contained everywhere.
  bool contains(const Rect& inner) const {
    if (inner.empty()) return true;
    return inner.y0 >= y0 && inner.y1 <= y1 && inner.x0 >= x0 &&
           inner.x1 <= x1;
  }

  Rect intersect(const Rect& o) const {
    Rect r{std::max(y0, o.y0), std::max(x0, o.x0), std::min(y1, o.y1),
           std::min(x1, o.x1)};
    if (r.y1 < r.y0) r.y1 = r.y0;
    if (r.x1 < r.x0) r.x1 = r.x0;
    return r;
  }
  Rect dilate(int by) const { return {y0 - by, x0 - by, y1 + by, x1 + by}; }
  Rect bounding_union(const Rect& o) const {
    if (empty()) return o;
    if (o.empty()) return *this;
    return {std::min(y0, o.y0), std::min(x0, o.x0), std::max(y1, o.y1),
            std::max(x1, o.x1)};
  }
  Rect transposed() const { return {x0, y0, x1, y1}; }

  friend bool operator==(const Rect& a, const Rect& b) {
    if (a.empty() && b.empty()) return true;
    return a.y0 == b.y0 && a.x0 == b.x0 && a.y1 == b.y1 && a.x1 == b.x1;
  }
  friend std::ostream& operator<<(std::ostream& os, const Rect& r) {
    return os << "(" << r.y0 << "," << r.x0 << ")-(" << r.y1 << "," << r.x1
              << ")";
  }
};

struct ProbeLocation {
  int index = 0;  // acquisition (raster) order
  int center_y = 0;
  int center_x = 0;
};

/// Closed bounding box of the disk of `radius` around `loc`, as a
/// half-open rectangle.
inline Rect circle_support(const ProbeLocation& loc, int radius) {
  return {loc.center_y - radius, loc.center_x - radius,
          loc.center_y + radius + 1, loc.center_x + radius + 1};
}

struct ScanPattern {
  std::vector<ProbeLocation> locations;
  int grid_rows = 0;
  int grid_cols = 0;
  int step_y = 0;
  int step_x = 0;
  int radius = 0;
  Point origin;

  std::size_t size() const { return locations.size(); }
  int grid_row(int index) const { return index / grid_cols; }
  int grid_col(int index) const { return index % grid_cols; }

  /// (2r - step) / 2r along x (equal to y on the square grids built here).
  double overlap_ratio() const;
};

ScanPattern build_raster_scan(int grid_rows, int grid_cols, int step,
                              Point origin, int radius, Extent volume_extent);

struct MeshSpec {
  int rows = 1;
  int cols = 1;

  int workers() const { return rows * cols; }
  int index(int r, int c) const { return r * cols + c; }
  friend bool operator==(const MeshSpec&, const MeshSpec&) = default;
};

struct TileSpec {
  int mesh_r = 0;
  int mesh_c = 0;
  Rect interior;
  Rect extended;
  int halo_width = 0;
  std::vector<int> probe_indices;
};

/// Splits `extent` into rows x cols interiors; the last row and column
/// absorb any remainder.
std::vector<Rect> mesh_interiors(Extent extent, MeshSpec mesh);

/// Index of the tile that owns a probe centred at (cy, cx): the first
/// tile in row-major order whose closed interior contains the centre.
int owning_tile(const std::vector<Rect>& interiors, int cy, int cx);

/// Decomposes the volume into halo-extended tiles and assigns each probe
/// to the tile containing its centre. Throws HaloTooSmall if an assigned
/// probe circle is not covered by its tile's extended rectangle.
std::vector<TileSpec> decompose_mesh(Extent volume_extent, MeshSpec mesh,
                                     int halo_width, const ScanPattern& scan);

/// Smallest halo for which decompose_mesh succeeds.
int minimal_halo(Extent volume_extent, MeshSpec mesh, const ScanPattern& scan);

/// Intersection of the two extended rectangles.
Rect overlap_region(const TileSpec& a, const TileSpec& b);

/// Row-major boolean mask over `region`.
struct Mask {
  Rect region;
  std::vector<std::uint8_t> bits;

  bool at(int y, int x) const {
    return bits[static_cast<std::size_t>(y - region.y0) * region.width() +
                (x - region.x0)] != 0;
  }
  std::int64_t count() const {
    return std::count(bits.begin(), bits.end(), std::uint8_t{1});
  }
};

/// True exactly where (y - cy)^2 + (x - cx)^2 <= radius^2.
Mask circle_mask(const ProbeLocation& loc, int radius, const Rect& region);

inline bool in_circle(const ProbeLocation& loc, int radius, int y, int x) {
  const std::int64_t dy = y - loc.center_y;
  const std::int64_t dx = x - loc.center_x;
  return dy * dy + dx * dx <= static_cast<std::int64_t>(radius) * radius;
}

}  // namespace ptychotile
