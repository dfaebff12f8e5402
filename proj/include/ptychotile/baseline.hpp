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

/// \file baseline.hpp
/// Halo voxel exchange: every tile also reconstructs the neighbouring
/// probes within a few scan rows of its own, on a halo wide enough to hold
/// them, and tiles resynchronise by copying interior voxels into the
/// neighbours' halos after each sweep.

#include <cstdint>
#include <vector>

#include "ptychotile/geometry.hpp"
#include "ptychotile/runtime.hpp"

namespace ptychotile {

struct HveTileSpec {
  TileSpec base;                         // interior and owned probes
  std::vector<int> extra_probe_indices;  // neighbour probes, raster order
  Rect augmented;                        // covers every own and extra circle

  /// Own and extra probes merged in raster order.
  std::vector<int> all_probes() const;
};

/// Throws TileTooSmall when some augmented tile reaches past the interiors
/// of its eight neighbours, so the copy-paste could not refresh its halo.
std::vector<HveTileSpec> hve_decompose(Extent volume_extent, MeshSpec mesh,
                                       const ScanPattern& scan,
                                       int extra_rows);

struct WorkerMemory {
  WorkerId id;
  std::int64_t voxels = 0;         // stored reconstruction rect x S
  std::int64_t measurements = 0;   // probes x N^2
  std::int64_t buffer_voxels = 0;  // accumulation buffer (gradient tiles only)
  int probes = 0;

  std::int64_t total() const { return voxels + measurements; }
};

struct MemoryReport {
  std::vector<WorkerMemory> workers;

  std::int64_t max_total() const;
  std::int64_t max_voxels() const;
  std::int64_t max_measurements() const;
};

MemoryReport memory_report(const std::vector<TileSpec>& tiles, int slices,
                           int grid_size);
MemoryReport memory_report(const std::vector<HveTileSpec>& tiles, int slices,
                           int grid_size);

struct HveResult {
  ReconResult run;
  std::vector<HveTileSpec> tiles;
  MemoryReport memory;
};

/// Per iteration each worker sweeps its own and extra probes with plain
/// gradient steps on its augmented tile, then sends interior voxels to all
/// eight neighbours (REPLACE), pasting received halos in ascending mesh
/// order. cfg.passes and cfg.halo are ignored.
HveResult hve_reconstruct(const ReconProblem& problem, MeshSpec mesh,
                          const ReconConfig& cfg, int extra_rows = 2);

}  // namespace ptychotile
