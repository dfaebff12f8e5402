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
#include "ptychotile/geometry.hpp"

#include <sstream>

#include "ptychotile/error.hpp"

namespace ptychotile {

double ScanPattern::overlap_ratio() const {
  if (radius == 0) return 0.0;
  return (2.0 * radius - step_x) / (2.0 * radius);
}

ScanPattern build_raster_scan(int grid_rows, int grid_cols, int step,
                              Point origin, int radius, Extent volume_extent) {
  if (grid_rows <= 0 || grid_cols <= 0 || step < 0 || radius < 0) {
    throw OutOfBounds("scan grid dimensions, step and radius must be positive");
  }
  ScanPattern scan;
  scan.grid_rows = grid_rows;
  scan.grid_cols = grid_cols;
  scan.step_y = step;
  scan.step_x = step;
  scan.radius = radius;
  scan.origin = origin;
  scan.locations.reserve(static_cast<std::size_t>(grid_rows) * grid_cols);

  const Rect volume = Rect::of(volume_extent);
  for (int gy = 0; gy < grid_rows; ++gy) {
    for (int gx = 0; gx < grid_cols; ++gx) {
      ProbeLocation loc{gy * grid_cols + gx, origin.y + gy * step,
                        origin.x + gx * step};
      if (!volume.contains(circle_support(loc, radius))) {
        std::ostringstream os;
        os << "probe " << loc.index << " at (" << loc.center_y << ","
           << loc.center_x << ") radius " << radius << " leaves volume "
           << volume_extent.height << "x" << volume_extent.width;
        throw OutOfBounds(os.str());
      }
      scan.locations.push_back(loc);
    }
  }
  return scan;
}

std::vector<Rect> mesh_interiors(Extent extent, MeshSpec mesh) {
  if (mesh.rows <= 0 || mesh.cols <= 0 || mesh.rows > extent.height ||
      mesh.cols > extent.width) {
    throw OutOfBounds("mesh does not fit the volume extent");
  }
  const int base_h = extent.height / mesh.rows;
  const int base_w = extent.width / mesh.cols;
  std::vector<Rect> out;
  out.reserve(static_cast<std::size_t>(mesh.workers()));
  for (int r = 0; r < mesh.rows; ++r) {
    const int y0 = r * base_h;
    const int y1 = (r == mesh.rows - 1) ? extent.height : y0 + base_h;
    for (int c = 0; c < mesh.cols; ++c) {
      const int x0 = c * base_w;
      const int x1 = (c == mesh.cols - 1) ? extent.width : x0 + base_w;
      out.push_back({y0, x0, y1, x1});
    }
  }
  return out;
}

int owning_tile(const std::vector<Rect>& interiors, int cy, int cx) {
  for (std::size_t i = 0; i < interiors.size(); ++i) {
    const Rect& r = interiors[i];
    if (cy >= r.y0 && cy <= r.y1 && cx >= r.x0 && cx <= r.x1) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

std::vector<TileSpec> decompose_mesh(Extent volume_extent, MeshSpec mesh,
                                     int halo_width, const ScanPattern& scan) {
  if (halo_width < 0) throw HaloTooSmall("negative halo width");
  const auto interiors = mesh_interiors(volume_extent, mesh);
  const Rect volume = Rect::of(volume_extent);

  std::vector<TileSpec> tiles(interiors.size());
  for (int r = 0; r < mesh.rows; ++r) {
    for (int c = 0; c < mesh.cols; ++c) {
      TileSpec& t = tiles[static_cast<std::size_t>(mesh.index(r, c))];
      t.mesh_r = r;
      t.mesh_c = c;
      t.interior = interiors[static_cast<std::size_t>(mesh.index(r, c))];
      t.extended = t.interior.dilate(halo_width).intersect(volume);
      t.halo_width = halo_width;
    }
  }

  for (const auto& loc : scan.locations) {
    const int owner = owning_tile(interiors, loc.center_y, loc.center_x);
    if (owner < 0) {
      throw OutOfBounds("probe centre outside the volume");
    }
    TileSpec& t = tiles[static_cast<std::size_t>(owner)];
    if (!t.extended.contains(circle_support(loc, scan.radius))) {
      std::ostringstream os;
      os << "probe " << loc.index << " circle " << circle_support(loc, scan.radius)
         << " not covered by tile (" << t.mesh_r << "," << t.mesh_c
         << ") extended " << t.extended << " with halo " << halo_width;
      throw HaloTooSmall(os.str());
    }
    t.probe_indices.push_back(loc.index);
  }
  return tiles;
}

int minimal_halo(Extent volume_extent, MeshSpec mesh, const ScanPattern& scan) {
  const auto interiors = mesh_interiors(volume_extent, mesh);
  const Rect volume = Rect::of(volume_extent);
  int halo = 0;
  for (const auto& loc : scan.locations) {
    const int owner = owning_tile(interiors, loc.center_y, loc.center_x);
    if (owner < 0) throw OutOfBounds("probe centre outside the volume");
    const Rect& in = interiors[static_cast<std::size_t>(owner)];
    const Rect need = circle_support(loc, scan.radius).intersect(volume);
    halo = std::max({halo, in.y0 - need.y0, in.x0 - need.x0, need.y1 - in.y1,
                     need.x1 - in.x1});
  }
  return halo;
}

Rect overlap_region(const TileSpec& a, const TileSpec& b) {
  return a.extended.intersect(b.extended);
}

Mask circle_mask(const ProbeLocation& loc, int radius, const Rect& region) {
  Mask m;
  m.region = region;
  m.bits.assign(static_cast<std::size_t>(region.area()), 0);
  const Rect hit = circle_support(loc, radius).intersect(region);
  for (int y = hit.y0; y < hit.y1; ++y) {
    for (int x = hit.x0; x < hit.x1; ++x) {
      if (in_circle(loc, radius, y, x)) {
        m.bits[static_cast<std::size_t>(y - region.y0) * region.width() +
               (x - region.x0)] = 1;
      }
    }
  }
  return m;
}

}  // namespace ptychotile
