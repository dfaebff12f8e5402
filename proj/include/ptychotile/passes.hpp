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

/// \file passes.hpp
/// Sequential reference semantics for accumulating gradient tiles across a
/// worker mesh. Forward passes ADD a tile's buffer into the next tile of
/// its column (row) over their overlap, as a chain; backward passes copy
/// (REPLACE) the accumulated overlap back along the chain. The concurrent
/// runtime reproduces exactly these operations.

#include <utility>
#include <vector>

#include "ptychotile/array.hpp"
#include "ptychotile/geometry.hpp"
#include "ptychotile/gradients.hpp"
#include "ptychotile/optics.hpp"

namespace ptychotile {

/// Accumulated gradient buffer of one tile, shaped like its extended rect.
struct GradBuffer {
  TileSpec tile;
  RegionArray data;

  static GradBuffer zeros(const TileSpec& tile, int slices) {
    return {tile, RegionArray(slices, tile.extended)};
  }
};

/// Row-major R x C grid of gradient buffers.
struct BufferMesh {
  MeshSpec mesh;
  std::vector<GradBuffer> buffers;

  static BufferMesh zeros(MeshSpec mesh, const std::vector<TileSpec>& tiles,
                          int slices);

  GradBuffer& at(int r, int c) {
    return buffers[static_cast<std::size_t>(mesh.index(r, c))];
  }
  const GradBuffer& at(int r, int c) const {
    return buffers[static_cast<std::size_t>(mesh.index(r, c))];
  }
};

/// Every pair of direct neighbours (including diagonals) replaces its
/// overlap with the sum of both pre-exchange buffers.
BufferMesh neighbor_add_exchange(BufferMesh mesh);

/// Down each tile column: buffer[r+1] += buffer[r] on their overlap, in
/// order r = 0 .. R-2.
BufferMesh vertical_forward(BufferMesh mesh);
/// Up each tile column: buffer[r-1] := buffer[r] on their overlap, in order
/// r = R-1 .. 1.
BufferMesh vertical_backward(BufferMesh mesh);
BufferMesh horizontal_forward(BufferMesh mesh);
BufferMesh horizontal_backward(BufferMesh mesh);

/// Vertical forward, vertical backward, horizontal forward and horizontal
/// backward, in that order.
BufferMesh full_pass(BufferMesh mesh);

/// Scatter-adds every per-probe gradient into a zero full-extent array.
RegionArray global_sum_oracle(const std::vector<GradField>& per_probe,
                              Extent extent, int slices);

/// Assembles the interiors of a full decomposition into one volume; halo
/// values are ignored. Throws IncompleteCover if the interiors do not
/// partition the extent.
RegionArray stitch(const std::vector<std::pair<TileSpec, RegionArray>>& tiles,
                   Extent extent);

/// Largest |buffer - oracle| over each buffer's extended rect, divided by
/// max |oracle|.
double max_relative_deviation(const BufferMesh& mesh,
                              const RegionArray& oracle);

/// Buffers transposed elementwise (y <-> x) with the mesh transposed too.
BufferMesh transpose(const BufferMesh& mesh);
RegionArray transpose(const RegionArray& a);

}  // namespace ptychotile
