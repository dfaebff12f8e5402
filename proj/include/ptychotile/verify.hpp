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

/// \file verify.hpp
/// Property suites behind `verify` and the acceptance tests. Every suite
/// compares against an independent oracle: central finite differences for
/// gradients, the brute-force global sum for accumulation, and the
/// sequential passes for the concurrent runtime.

#include <cstdint>
#include <string>
#include <vector>

#include "ptychotile/geometry.hpp"
#include "ptychotile/runtime.hpp"

namespace ptychotile {

struct CheckReport {
  std::string name;
  bool passed = false;
  double metric = 0.0;     // worst observed value
  double threshold = 0.0;  // the bound it is held to
  std::vector<std::string> lines;
};

/// A raster scan and volume with the given circle overlap ratio whose
/// interiors are `interior` voxels wide on `mesh`. Supported ratios are
/// 1/3 and 3/4.
struct AccumulationCase {
  MeshSpec mesh;
  Extent extent;
  ScanPattern scan;
  std::vector<TileSpec> tiles;
};
AccumulationCase accumulation_case(MeshSpec mesh, double overlap_ratio);

/// Random values on every probe circle, zero elsewhere.
std::vector<RegionArray> random_circle_gradients(const ScanPattern& scan,
                                                 int slices,
                                                 std::uint64_t seed);

/// Adjoint gradient against central differences on `seeds` random
/// instances (detector 16 or 32, 1 to 3 slices).
CheckReport check_gradient_fd(int seeds, double tolerance = 1e-5);

/// full_pass against the global sum on 2x2, 3x3 and 4x3 meshes at overlap
/// ratios 1/3 and 3/4.
CheckReport check_accumulation(int seeds = 1, double tolerance = 1e-10);

/// Passes when neighbour adds alone are caught deviating from the global
/// sum at overlap 3/4 by more than `threshold`.
CheckReport check_neighbor_insufficiency(int seeds = 1, double threshold = 1e-3);

/// Frozen-update runtime buffers against the sequential passes, under the
/// baton scheduler and free-running threads.
CheckReport check_runtime_vs_reference(int seeds = 1, double tolerance = 1e-12);

/// Messages per full pass and a cross-direction pipelining witness in the
/// schedule trace.
CheckReport check_message_budget();

/// Small noise-free reconstruction problem for the runtime checks.
ReconProblem small_problem(MeshSpec mesh, double overlap_ratio, int slices,
                           std::uint64_t seed);

}  // namespace ptychotile
