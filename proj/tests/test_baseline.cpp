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
#include <gtest/gtest.h>

#include "ptychotile/baseline.hpp"
#include "ptychotile/datastore.hpp"
#include "ptychotile/error.hpp"

namespace ptychotile {
namespace {

ReconProblem grid_problem(int n) {
  ReconProblem p;
  p.extent = {16 * n, 16 * n};
  p.slices = 2;
  p.scan = build_raster_scan(n, n, 16, {8, 8}, 6, p.extent);
  ProbeParams pp;
  pp.grid_size = 16;
  pp.aperture_semiangle = 0.25;
  pp.aperture_rolloff = 0.5;
  pp.propagator = 2.0;
  p.probe = make_probe(pp);
  const Volume truth = make_phantom(2, p.extent, 10.0, 6.0, 0.5, 1);
  p.measurements = simulate_measurements(truth, p.scan, p.probe);
  return p;
}

ReconConfig sweep_config(int iterations) {
  ReconConfig cfg;
  cfg.iterations = iterations;
  cfg.alpha = StepSize(1.0);
  cfg.init_noise = 0.01;
  cfg.seed = 5;
  return cfg;
}

TEST(HveDecompose, SingleTileHoldsEverything) {
  const ReconProblem p = grid_problem(3);
  const auto tiles = hve_decompose(p.extent, {1, 1}, p.scan, 2);
  ASSERT_EQ(tiles.size(), 1u);
  EXPECT_EQ(tiles[0].base.probe_indices.size(), 9u);
  EXPECT_TRUE(tiles[0].extra_probe_indices.empty());
  EXPECT_EQ(tiles[0].augmented, Rect::of(p.extent));
  EXPECT_EQ(tiles[0].base.halo_width, 0);
}

TEST(HveDecompose, CentreTileGetsAllNineProbes) {
  const ReconProblem p = grid_problem(3);
  const auto tiles = hve_decompose(p.extent, {3, 3}, p.scan, 1);
  const HveTileSpec& centre = tiles[4];
  EXPECT_EQ(centre.base.probe_indices, std::vector<int>{4});
  EXPECT_EQ(centre.all_probes(), (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(tiles[0].all_probes(), (std::vector<int>{0, 1, 3, 4}));
  EXPECT_EQ(tiles[1].all_probes(), (std::vector<int>{0, 1, 2, 3, 4, 5}));
}

TEST(HveDecompose, AugmentedCoversEveryCircle) {
  const ReconProblem p = grid_problem(6);
  for (int extra : {0, 1, 2}) {
    for (const auto& t : hve_decompose(p.extent, {3, 3}, p.scan, extra)) {
      EXPECT_TRUE(t.augmented.contains(t.base.interior));
      for (int i : t.all_probes()) {
        EXPECT_TRUE(t.augmented.contains(
            circle_support(p.scan.locations[static_cast<std::size_t>(i)], p.scan.radius)));
      }
    }
  }
}

TEST(HveDecompose, ExtraRowsZeroMatchesGradientTiles) {
  const ReconProblem p = grid_problem(6);
  const auto hve = hve_decompose(p.extent, {3, 3}, p.scan, 0);
  for (const auto& t : hve) EXPECT_TRUE(t.extra_probe_indices.empty());
}

TEST(HveDecompose, FineMeshIsTooSmall) {
  const ReconProblem p = grid_problem(6);
  const MeshSpec fine{6, 6};
  EXPECT_NO_THROW(decompose_mesh(p.extent, fine, minimal_halo(p.extent, fine, p.scan), p.scan));
  EXPECT_THROW(hve_decompose(p.extent, fine, p.scan, 2), TileTooSmall);
  EXPECT_NO_THROW(hve_decompose(p.extent, fine, p.scan, 1));
  EXPECT_THROW(hve_decompose(p.extent, fine, p.scan, -1), ConfigError);
}

TEST(MemoryReport, SingleTileCountsWholeProblem) {
  const ReconProblem p = grid_problem(3);
  const auto gd = decompose_mesh(p.extent, {1, 1}, 0, p.scan);
  const MemoryReport m = memory_report(gd, 2, 16);
  ASSERT_EQ(m.workers.size(), 1u);
  EXPECT_EQ(m.workers[0].voxels, 48 * 48 * 2);
  EXPECT_EQ(m.workers[0].measurements, 9 * 16 * 16);
  EXPECT_EQ(m.workers[0].probes, 9);
  const MemoryReport h = memory_report(hve_decompose(p.extent, {1, 1}, p.scan, 2), 2, 16);
  EXPECT_EQ(h.workers[0].total(), m.workers[0].total());
}

TEST(MemoryReport, DoublingTheMeshQuartersInteriors) {
  const Extent e{64, 96};
  const auto coarse = decompose_mesh(e, {2, 2}, 0, ScanPattern{});
  const auto fine = decompose_mesh(e, {4, 4}, 0, ScanPattern{});
  const MemoryReport a = memory_report(coarse, 3, 8);
  const MemoryReport b = memory_report(fine, 3, 8);
  for (const auto& w : b.workers) EXPECT_EQ(w.voxels * 4, a.workers[0].voxels);
}

TEST(MemoryReport, GradientTilesStoreLessThanHve) {
  const ReconProblem p = grid_problem(6);
  for (MeshSpec mesh : {MeshSpec{2, 2}, MeshSpec{3, 3}}) {
    const auto gd_tiles =
        decompose_mesh(p.extent, mesh, minimal_halo(p.extent, mesh, p.scan), p.scan);
    const MemoryReport gd = memory_report(gd_tiles, 2, 16);
    const MemoryReport hve = memory_report(hve_decompose(p.extent, mesh, p.scan, 1), 2, 16);
    for (std::size_t i = 0; i < gd.workers.size(); ++i) {
      EXPECT_LT(gd.workers[i].measurements, hve.workers[i].measurements);
      EXPECT_LT(gd.workers[i].voxels, hve.workers[i].voxels);
      EXPECT_EQ(gd.workers[i].buffer_voxels, gd.workers[i].voxels);
      EXPECT_EQ(hve.workers[i].buffer_voxels, 0);
    }
  }
}

TEST(HveReconstruct, SingleTileIsSequentialDescent) {
  const ReconProblem p = grid_problem(3);
  ReconConfig cfg = sweep_config(3);
  const HveResult h = hve_reconstruct(p, {1, 1}, cfg, 2);
  cfg.passes = PassSchedule::never();
  const ReconResult ref = reference_reconstruct(p, cfg);
  EXPECT_EQ(h.run.volume.data, ref.volume.data);
  EXPECT_EQ(h.run.log, ref.log);
}

TEST(HveReconstruct, AllProbesOnEveryTileMatchesFullReconstruction) {
  const ReconProblem p = grid_problem(4);
  ReconConfig cfg = sweep_config(2);
  const HveResult h = hve_reconstruct(p, {2, 2}, cfg, 3);
  for (const auto& t : h.tiles) EXPECT_EQ(t.all_probes().size(), 16u);
  cfg.passes = PassSchedule::never();
  const ReconResult ref = reference_reconstruct(p, cfg);
  EXPECT_EQ(h.run.volume.data, ref.volume.data);
}

TEST(HveReconstruct, DeterministicAndThreaded) {
  const ReconProblem p = grid_problem(6);
  ReconConfig cfg = sweep_config(2);
  const HveResult a = hve_reconstruct(p, {3, 3}, cfg, 1);
  const HveResult b = hve_reconstruct(p, {3, 3}, cfg, 1);
  EXPECT_EQ(a.run.volume.data, b.run.volume.data);
  EXPECT_EQ(a.run.log, b.run.log);
  cfg.deterministic = false;
  const HveResult c = hve_reconstruct(p, {3, 3}, cfg, 1);
  EXPECT_EQ(a.run.volume.data, c.run.volume.data);
  // Eight, five or three neighbours, one paste each per iteration.
  EXPECT_EQ(a.run.timing.total_messages(), 2 * (4 * 3 + 4 * 5 + 8));
  EXPECT_LT(a.run.log.back().cost, a.run.log.front().cost);
}

}  // namespace
}  // namespace ptychotile
