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
#include "ptychotile/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <sstream>

#include "ptychotile/error.hpp"

namespace ptychotile {
namespace {

using Clock = std::chrono::steady_clock;

bool chebyshev_neighbours(WorkerId a, WorkerId b) {
  const int dr = std::abs(a.mesh_r - b.mesh_r);
  const int dc = std::abs(a.mesh_c - b.mesh_c);
  return std::max(dr, dc) == 1;
}

Rect neighbourhood(const std::vector<Rect>& interiors, MeshSpec mesh, int r,
                   int c) {
  Rect box = interiors[static_cast<std::size_t>(mesh.index(r, c))];
  for (int rr = std::max(0, r - 1); rr <= std::min(mesh.rows - 1, r + 1); ++rr) {
    for (int cc = std::max(0, c - 1); cc <= std::min(mesh.cols - 1, c + 1); ++cc) {
      box = box.bounding_union(interiors[static_cast<std::size_t>(mesh.index(rr, cc))]);
    }
  }
  return box;
}

}  // namespace

std::vector<int> HveTileSpec::all_probes() const {
  std::vector<int> all = base.probe_indices;
  all.insert(all.end(), extra_probe_indices.begin(), extra_probe_indices.end());
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<HveTileSpec> hve_decompose(Extent volume_extent, MeshSpec mesh,
                                       const ScanPattern& scan,
                                       int extra_rows) {
  if (extra_rows < 0) throw ConfigError("extra_rows must be >= 0");
  const int halo = minimal_halo(volume_extent, mesh, scan);
  const auto base = decompose_mesh(volume_extent, mesh, halo, scan);
  const auto interiors = mesh_interiors(volume_extent, mesh);
  const Rect volume = Rect::of(volume_extent);

  std::vector<HveTileSpec> out;
  out.reserve(base.size());
  for (const auto& t : base) {
    HveTileSpec h;
    h.base = t;
    std::vector<char> own(scan.size(), 0);
    for (int i : t.probe_indices) own[static_cast<std::size_t>(i)] = 1;
    for (const auto& loc : scan.locations) {
      if (own[static_cast<std::size_t>(loc.index)]) continue;
      const int gy = scan.grid_row(loc.index);
      const int gx = scan.grid_col(loc.index);
      for (int i : t.probe_indices) {
        const int d = std::max(std::abs(gy - scan.grid_row(i)),
                               std::abs(gx - scan.grid_col(i)));
        if (d <= extra_rows) {
          h.extra_probe_indices.push_back(loc.index);
          break;
        }
      }
    }
    Rect aug = t.interior;
    for (int i : h.all_probes()) {
      aug = aug.bounding_union(
          circle_support(scan.locations[static_cast<std::size_t>(i)], scan.radius));
    }
    h.augmented = aug.intersect(volume);
    const Rect limit = neighbourhood(interiors, mesh, t.mesh_r, t.mesh_c);
    if (!limit.contains(h.augmented)) {
      std::ostringstream os;
      os << "tile (" << t.mesh_r << "," << t.mesh_c << ") augmented "
         << h.augmented << " reaches past its neighbours' interiors " << limit;
      throw TileTooSmall(os.str());
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::int64_t MemoryReport::max_total() const {
  std::int64_t m = 0;
  for (const auto& w : workers) m = std::max(m, w.total());
  return m;
}

std::int64_t MemoryReport::max_voxels() const {
  std::int64_t m = 0;
  for (const auto& w : workers) m = std::max(m, w.voxels);
  return m;
}

std::int64_t MemoryReport::max_measurements() const {
  std::int64_t m = 0;
  for (const auto& w : workers) m = std::max(m, w.measurements);
  return m;
}

MemoryReport memory_report(const std::vector<TileSpec>& tiles, int slices,
                           int grid_size) {
  MemoryReport rep;
  const std::int64_t n2 = static_cast<std::int64_t>(grid_size) * grid_size;
  for (const auto& t : tiles) {
    WorkerMemory w;
    w.id = {t.mesh_r, t.mesh_c};
    w.voxels = t.extended.area() * slices;
    w.buffer_voxels = w.voxels;
    w.probes = static_cast<int>(t.probe_indices.size());
    w.measurements = w.probes * n2;
    rep.workers.push_back(w);
  }
  return rep;
}

MemoryReport memory_report(const std::vector<HveTileSpec>& tiles, int slices,
                           int grid_size) {
  MemoryReport rep;
  const std::int64_t n2 = static_cast<std::int64_t>(grid_size) * grid_size;
  for (const auto& t : tiles) {
    WorkerMemory w;
    w.id = {t.base.mesh_r, t.base.mesh_c};
    w.voxels = t.augmented.area() * slices;
    w.probes = static_cast<int>(t.base.probe_indices.size() +
                                t.extra_probe_indices.size());
    w.measurements = w.probes * n2;
    rep.workers.push_back(w);
  }
  return rep;
}

HveResult hve_reconstruct(const ReconProblem& problem, MeshSpec mesh,
                          const ReconConfig& cfg, int extra_rows) {
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (problem.measurements.size() != problem.scan.size()) {
    throw ConfigError("measurement count does not match the scan");
  }
  HveResult result;
  result.tiles = hve_decompose(problem.extent, mesh, problem.scan, extra_rows);
  result.memory = memory_report(result.tiles, problem.slices,
                                problem.probe.params.grid_size);
  const auto& tiles = result.tiles;
  for (const auto& t : tiles) result.run.tiles.push_back(t.base);

  FabricOptions options;
  options.deterministic = cfg.deterministic;
  options.timing = cfg.timing;
  options.cost = cfg.cost;
  options.with_monitor = true;
  options.record_trace = cfg.record_trace;
  options.validate = [&tiles, mesh](const RegionMessage& m) {
    if (!chebyshev_neighbours(m.src, m.dst)) return false;
    const auto& a = tiles[static_cast<std::size_t>(mesh.index(m.src.mesh_r, m.src.mesh_c))];
    const auto& b = tiles[static_cast<std::size_t>(mesh.index(m.dst.mesh_r, m.dst.mesh_c))];
    return a.base.interior.intersect(b.augmented).contains(m.region);
  };
  MessageFabric fabric(mesh, options);

  const auto k = static_cast<std::size_t>(mesh.workers());
  std::vector<RegionArray> final_tiles(k);
  const int slices = problem.slices;
  ReconResult& run = result.run;

  auto worker = [&](WorkerId id) {
    const auto idx = static_cast<std::size_t>(mesh.index(id.mesh_r, id.mesh_c));
    const HveTileSpec& tile = tiles[idx];
    const std::vector<int> probes = tile.all_probes();
    Volume v{initial_volume(slices, tile.augmented, cfg, problem.extent),
             problem.extent, problem.pitch_y, problem.pitch_x,
             problem.slice_thickness};
    std::vector<WorkerId> neighbours;
    for (int r = id.mesh_r - 1; r <= id.mesh_r + 1; ++r) {
      for (int c = id.mesh_c - 1; c <= id.mesh_c + 1; ++c) {
        if (r < 0 || c < 0 || r >= mesh.rows || c >= mesh.cols) continue;
        if (r == id.mesh_r && c == id.mesh_c) continue;
        neighbours.push_back({r, c});
      }
    }

    for (int it = 0; it < cfg.iterations; ++it) {
      for (int i : probes) {
        const auto t0 = Clock::now();
        const ProbeLocation& loc = problem.scan.locations[static_cast<std::size_t>(i)];
        GradField g = grad(problem.measurements[static_cast<std::size_t>(i)],
                           problem.probe, loc, v);
        if (cfg.mask_gradients) g = mask_to_circle(std::move(g), loc, problem.scan.radius);
        apply_step(v.data, g, cfg.alpha);
        fabric.charge_compute(id, cfg.cost.per_probe,
                              std::chrono::duration<double>(Clock::now() - t0).count());
      }
      for (WorkerId n : neighbours) {
        const auto& other = tiles[static_cast<std::size_t>(mesh.index(n.mesh_r, n.mesh_c))];
        const Rect region = tile.base.interior.intersect(other.augmented);
        fabric.send(RegionMessage::carrying(id, n, v.data, region,
                                            CombineMode::Replace, PhaseTag::Halo));
      }
      for (WorkerId n : neighbours) {
        fold(fabric.await_region(id, PhaseTag::Halo, n), v.data);
      }
      fabric.send(RegionMessage::carrying(id, WorkerId::monitor(), v.data,
                                          tile.base.interior,
                                          CombineMode::Replace,
                                          PhaseTag::Snapshot));
    }
    final_tiles[idx] = std::move(v.data);
  };

  auto monitor = [&] {
    Volume full{RegionArray(slices, Rect::of(problem.extent)), problem.extent,
                problem.pitch_y, problem.pitch_x, problem.slice_thickness};
    for (int it = 0; it < cfg.iterations; ++it) {
      double latest = 0.0;
      for (int r = 0; r < mesh.rows; ++r) {
        for (int c = 0; c < mesh.cols; ++c) {
          const RegionMessage m = fabric.await_region(
              WorkerId::monitor(), PhaseTag::Snapshot, {r, c});
          latest = std::max(latest, m.timestamp);
          fold(m, full.data);
        }
      }
      run.log.push_back({it + 1, total_cost(problem, full), latest});
    }
  };

  fabric.run(worker, monitor);

  std::vector<std::pair<TileSpec, RegionArray>> parts;
  for (std::size_t i = 0; i < k; ++i) parts.emplace_back(tiles[i].base, std::move(final_tiles[i]));
  run.volume = Volume{stitch(parts, problem.extent), problem.extent,
                      problem.pitch_y, problem.pitch_x, problem.slice_thickness};
  run.timing = fabric.timing();
  run.trace = fabric.trace();
  run.probe_steps = 0;
  for (const auto& t : tiles) {
    run.probe_steps = std::max(run.probe_steps, static_cast<int>(t.all_probes().size()));
  }
  return result;
}

}  // namespace ptychotile
