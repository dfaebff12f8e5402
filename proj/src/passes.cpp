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
#include "ptychotile/passes.hpp"

#include <algorithm>
#include <cmath>

#include "ptychotile/error.hpp"

namespace ptychotile {
namespace {

void add_overlap(const GradBuffer& from, GradBuffer& to) {
  const Rect ov = overlap_region(from.tile, to.tile);
  if (ov.empty()) return;
  to.data.add(from.data.extract(ov));
}

void replace_overlap(const GradBuffer& from, GradBuffer& to) {
  const Rect ov = overlap_region(from.tile, to.tile);
  if (ov.empty()) return;
  to.data.assign(from.data.extract(ov));
}

}  // namespace

BufferMesh BufferMesh::zeros(MeshSpec mesh, const std::vector<TileSpec>& tiles,
                             int slices) {
  if (static_cast<int>(tiles.size()) != mesh.workers()) {
    throw ShapeMismatch("tile count does not match the mesh");
  }
  BufferMesh m{mesh, {}};
  m.buffers.reserve(tiles.size());
  for (const auto& t : tiles) m.buffers.push_back(GradBuffer::zeros(t, slices));
  return m;
}

BufferMesh neighbor_add_exchange(BufferMesh mesh) {
  const BufferMesh snapshot = mesh;
  const MeshSpec& m = mesh.mesh;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      GradBuffer& self = mesh.at(r, c);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int nr = r + dr;
          const int nc = c + dc;
          if (nr < 0 || nr >= m.rows || nc < 0 || nc >= m.cols) continue;
          add_overlap(snapshot.at(nr, nc), self);
        }
      }
    }
  }
  return mesh;
}

BufferMesh vertical_forward(BufferMesh mesh) {
  for (int c = 0; c < mesh.mesh.cols; ++c) {
    for (int r = 0; r + 1 < mesh.mesh.rows; ++r) {
      add_overlap(mesh.at(r, c), mesh.at(r + 1, c));
    }
  }
  return mesh;
}

BufferMesh vertical_backward(BufferMesh mesh) {
  for (int c = 0; c < mesh.mesh.cols; ++c) {
    for (int r = mesh.mesh.rows - 1; r >= 1; --r) {
      replace_overlap(mesh.at(r, c), mesh.at(r - 1, c));
    }
  }
  return mesh;
}

BufferMesh horizontal_forward(BufferMesh mesh) {
  for (int r = 0; r < mesh.mesh.rows; ++r) {
    for (int c = 0; c + 1 < mesh.mesh.cols; ++c) {
      add_overlap(mesh.at(r, c), mesh.at(r, c + 1));
    }
  }
  return mesh;
}

BufferMesh horizontal_backward(BufferMesh mesh) {
  for (int r = 0; r < mesh.mesh.rows; ++r) {
    for (int c = mesh.mesh.cols - 1; c >= 1; --c) {
      replace_overlap(mesh.at(r, c), mesh.at(r, c - 1));
    }
  }
  return mesh;
}

BufferMesh full_pass(BufferMesh mesh) {
  mesh = vertical_forward(std::move(mesh));
  mesh = vertical_backward(std::move(mesh));
  mesh = horizontal_forward(std::move(mesh));
  return horizontal_backward(std::move(mesh));
}

RegionArray global_sum_oracle(const std::vector<GradField>& per_probe,
                              Extent extent, int slices) {
  RegionArray total(slices, Rect::of(extent));
  for (const auto& g : per_probe) total.add(g);
  return total;
}

RegionArray stitch(const std::vector<std::pair<TileSpec, RegionArray>>& tiles,
                   Extent extent) {
  if (tiles.empty()) throw IncompleteCover("no tiles");
  const Rect whole = Rect::of(extent);
  const int slices = tiles.front().second.slices();
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(whole.area()), 0);
  RegionArray out(slices, whole);
  for (const auto& [tile, data] : tiles) {
    const Rect& in = tile.interior;
    if (!whole.contains(in) || !data.region().contains(in)) {
      throw IncompleteCover("tile interior outside the extent or its data");
    }
    for (int y = in.y0; y < in.y1; ++y) {
      for (int x = in.x0; x < in.x1; ++x) {
        auto& bit = covered[static_cast<std::size_t>(y) * whole.width() + x];
        if (bit) throw IncompleteCover("tile interiors overlap");
        bit = 1;
      }
    }
    out.assign(data.extract(in));
  }
  if (std::find(covered.begin(), covered.end(), 0) != covered.end()) {
    throw IncompleteCover("tile interiors leave part of the extent uncovered");
  }
  return out;
}

double max_relative_deviation(const BufferMesh& mesh,
                              const RegionArray& oracle) {
  double scale = 0.0;
  for (double v : oracle.values()) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (const auto& b : mesh.buffers) {
    const Rect& r = b.data.region();
    for (int s = 0; s < b.data.slices(); ++s) {
      for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) {
          worst = std::max(worst,
                           std::abs(b.data.at(s, y, x) - oracle.at(s, y, x)));
        }
      }
    }
  }
  if (scale == 0.0) return worst;
  return worst / scale;
}

RegionArray transpose(const RegionArray& a) {
  const Rect r = a.region();
  RegionArray out(a.slices(), r.transposed());
  for (int s = 0; s < a.slices(); ++s) {
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) out.at(s, x, y) = a.at(s, y, x);
    }
  }
  return out;
}

BufferMesh transpose(const BufferMesh& mesh) {
  BufferMesh out{{mesh.mesh.cols, mesh.mesh.rows}, {}};
  out.buffers.resize(mesh.buffers.size());
  for (int r = 0; r < mesh.mesh.rows; ++r) {
    for (int c = 0; c < mesh.mesh.cols; ++c) {
      const GradBuffer& b = mesh.at(r, c);
      GradBuffer t;
      t.tile = b.tile;
      t.tile.mesh_r = c;
      t.tile.mesh_c = r;
      t.tile.interior = b.tile.interior.transposed();
      t.tile.extended = b.tile.extended.transposed();
      t.data = transpose(b.data);
      out.at(c, r) = std::move(t);
    }
  }
  return out;
}

}  // namespace ptychotile
