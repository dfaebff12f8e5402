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
#include "ptychotile/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "ptychotile/error.hpp"

namespace ptychotile {
namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void validate_problem(const ReconProblem& p, const ReconConfig& cfg) {
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (p.slices < 1) throw ConfigError("volume needs at least one slice");
  if (p.measurements.size() != p.scan.size()) {
    throw ConfigError("measurement count does not match the scan");
  }
  for (std::size_t i = 0; i < p.measurements.size(); ++i) {
    if (p.measurements[i].magnitude.rows() != p.probe.params.grid_size) {
      throw ConfigError("measurement size does not match the probe grid");
    }
  }
}

bool direct_neighbours(WorkerId a, WorkerId b) {
  return std::abs(a.mesh_r - b.mesh_r) + std::abs(a.mesh_c - b.mesh_c) == 1;
}

/// One probe step of a worker: gradient on the local tile, accumulation
/// and the local descent step.
void probe_step(const ReconProblem& problem, const ReconConfig& cfg, int index,
                Volume& tile, RegionArray& acc) {
  const ProbeLocation& loc = problem.scan.locations[static_cast<std::size_t>(index)];
  GradField g = grad(problem.measurements[static_cast<std::size_t>(index)],
                     problem.probe, loc, tile);
  if (cfg.mask_gradients) g = mask_to_circle(std::move(g), loc, problem.scan.radius);
  acc.add(g);
  apply_step(tile.data, g, cfg.alpha);
}

/// Vertical forward, vertical backward, horizontal forward, horizontal
/// backward for the worker at `id`, over message channels.
void pipelined_pass(MessageFabric& fabric, WorkerId id,
                    const std::vector<TileSpec>& tiles, RegionArray& acc) {
  const MeshSpec& mesh = fabric.mesh();
  const int r = id.mesh_r;
  const int c = id.mesh_c;
  auto tile_of = [&](int rr, int cc) -> const TileSpec& {
    return tiles[static_cast<std::size_t>(mesh.index(rr, cc))];
  };
  const TileSpec& self = tile_of(r, c);
  auto send_to = [&](int rr, int cc, CombineMode mode, PhaseTag tag) {
    const Rect ov = overlap_region(self, tile_of(rr, cc));
    fabric.send(
        RegionMessage::carrying(id, {rr, cc}, acc, ov, mode, tag));
  };
  auto receive_from = [&](int rr, int cc, PhaseTag tag) {
    fold(fabric.await_region(id, tag, {rr, cc}), acc);
  };

  if (r > 0) receive_from(r - 1, c, PhaseTag::VFwd);
  if (r + 1 < mesh.rows) send_to(r + 1, c, CombineMode::Add, PhaseTag::VFwd);
  if (r + 1 < mesh.rows) receive_from(r + 1, c, PhaseTag::VBwd);
  if (r > 0) send_to(r - 1, c, CombineMode::Replace, PhaseTag::VBwd);

  if (c > 0) receive_from(r, c - 1, PhaseTag::HFwd);
  if (c + 1 < mesh.cols) send_to(r, c + 1, CombineMode::Add, PhaseTag::HFwd);
  if (c + 1 < mesh.cols) receive_from(r, c + 1, PhaseTag::HBwd);
  if (c > 0) send_to(r, c - 1, CombineMode::Replace, PhaseTag::HBwd);
}

RegionMessage control_message(WorkerId dst, bool stop) {
  RegionMessage m;
  m.src = WorkerId::monitor();
  m.dst = dst;
  m.region = {0, 0, 1, 1};
  m.slices = 1;
  m.payload = {stop ? 1.0 : 0.0};
  m.mode = CombineMode::Replace;
  m.tag = PhaseTag::Control;
  return m;
}

bool should_stop(const ReconConfig& cfg, double previous, double current) {
  if (!cfg.stop_tolerance) return false;
  if (previous <= 0.0) return true;
  return (previous - current) / previous < *cfg.stop_tolerance;
}

}  // namespace

double total_cost(const ReconProblem& problem, const Volume& volume) {
  double f = 0.0;
  for (std::size_t i = 0; i < problem.scan.size(); ++i) {
    f += loss(problem.measurements[i], problem.probe, problem.scan.locations[i],
              volume);
  }
  return f;
}

bool ResolvedSchedule::fires(int iteration, int step) const {
  switch (kind) {
    case PassSchedule::Kind::Never:
      return false;
    case PassSchedule::Kind::EveryT: {
      const std::int64_t global =
          static_cast<std::int64_t>(iteration) * steps_per_iteration + step + 1;
      return global % period == 0;
    }
    case PassSchedule::Kind::PerIteration:
      for (int m = 1; m <= per_iteration; ++m) {
        const int boundary =
            (m * steps_per_iteration + per_iteration - 1) / per_iteration;
        if (step + 1 == boundary) return true;
      }
      return false;
  }
  return false;
}

ResolvedSchedule resolve_schedule(const PassSchedule& schedule,
                                  int steps_per_iteration,
                                  std::vector<std::string>* warnings) {
  if (steps_per_iteration < 1) throw ConfigError("no probes to schedule");
  ResolvedSchedule out;
  out.kind = schedule.kind;
  out.steps_per_iteration = steps_per_iteration;
  auto warn = [&](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };
  switch (schedule.kind) {
    case PassSchedule::Kind::Never:
      break;
    case PassSchedule::Kind::EveryT:
      if (schedule.value < 1) throw ConfigError("pass period T must be >= 1");
      if (schedule.value > steps_per_iteration) {
        std::ostringstream os;
        os << "pass period " << schedule.value << " exceeds the "
           << steps_per_iteration
           << " probe steps per iteration; passing once per iteration";
        warn(os.str());
        out.kind = PassSchedule::Kind::PerIteration;
        out.per_iteration = 1;
      } else {
        out.period = schedule.value;
      }
      break;
    case PassSchedule::Kind::PerIteration:
      if (schedule.value < 1) {
        throw ConfigError("passes per iteration must be >= 1");
      }
      out.per_iteration = schedule.value;
      if (schedule.value > steps_per_iteration) {
        warn("more passes per iteration than probe steps; passing every step");
        out.per_iteration = steps_per_iteration;
      }
      break;
  }
  return out;
}

RegionArray initial_volume(int slices, const Rect& region,
                           const ReconConfig& cfg, Extent extent) {
  RegionArray v(slices, region);
  if (cfg.init_noise == 0.0) return v;
  // Keyed by global voxel so that overlapping tiles start identical.
  for (int s = 0; s < slices; ++s) {
    for (int y = region.y0; y < region.y1; ++y) {
      for (int x = region.x0; x < region.x1; ++x) {
        const std::uint64_t key =
            ((static_cast<std::uint64_t>(s) * extent.height + y) * extent.width +
             x);
        const std::uint64_t h = splitmix64(cfg.seed ^ splitmix64(key));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        v.at(s, y, x) = cfg.init_noise * u;
      }
    }
  }
  return v;
}

ReconResult appp_reconstruct(const ReconProblem& problem, MeshSpec mesh,
                             const ReconConfig& cfg) {
  validate_problem(problem, cfg);
  ReconResult result;

  const int halo = cfg.halo >= 0 ? cfg.halo
                                 : minimal_halo(problem.extent, mesh, problem.scan);
  std::vector<TileSpec> tiles;
  try {
    tiles = decompose_mesh(problem.extent, mesh, halo, problem.scan);
  } catch (const HaloTooSmall& e) {
    throw CoverageError(e.what());
  }
  if (mesh.workers() > 1) {
    for (const auto& t : tiles) {
      const bool needs_h = mesh.cols > 1;
      const bool needs_v = mesh.rows > 1;
      if ((needs_v && halo >= t.interior.height()) ||
          (needs_h && halo >= t.interior.width())) {
        throw ConfigError("halo must be narrower than every tile interior");
      }
    }
  }

  int steps = 0;
  for (const auto& t : tiles) {
    steps = std::max(steps, static_cast<int>(t.probe_indices.size()));
  }
  const ResolvedSchedule schedule =
      resolve_schedule(cfg.passes, steps, &result.warnings);
  result.tiles = tiles;
  result.probe_steps = steps;

  FabricOptions options;
  options.deterministic = cfg.deterministic;
  options.timing = cfg.timing;
  options.cost = cfg.cost;
  options.with_monitor = true;
  options.record_trace = cfg.record_trace;
  options.validate = [&tiles, mesh](const RegionMessage& m) {
    if (!direct_neighbours(m.src, m.dst)) return false;
    const TileSpec& a = tiles[static_cast<std::size_t>(mesh.index(m.src.mesh_r, m.src.mesh_c))];
    const TileSpec& b = tiles[static_cast<std::size_t>(mesh.index(m.dst.mesh_r, m.dst.mesh_c))];
    return overlap_region(a, b).contains(m.region);
  };
  MessageFabric fabric(mesh, options);

  const auto k = static_cast<std::size_t>(mesh.workers());
  std::vector<RegionArray> final_tiles(k);
  std::vector<RegionArray> captured(cfg.capture_pass_buffers ? k : 0);
  std::vector<int> rounds(k, 0);
  const int slices = problem.slices;

  auto worker = [&](WorkerId id) {
    const auto idx = static_cast<std::size_t>(mesh.index(id.mesh_r, id.mesh_c));
    const TileSpec& tile = tiles[idx];
    Volume v{initial_volume(slices, tile.extended, cfg, problem.extent),
             problem.extent, problem.pitch_y, problem.pitch_x,
             problem.slice_thickness};
    RegionArray acc(slices, tile.extended);

    for (int it = 0; it < cfg.iterations; ++it) {
      for (int step = 0; step < steps; ++step) {
        if (step < static_cast<int>(tile.probe_indices.size())) {
          const auto t0 = Clock::now();
          probe_step(problem, cfg, tile.probe_indices[static_cast<std::size_t>(step)], v, acc);
          fabric.charge_compute(
              id, cfg.cost.per_probe,
              std::chrono::duration<double>(Clock::now() - t0).count());
        }
        if (schedule.fires(it, step)) {
          pipelined_pass(fabric, id, tiles, acc);
          if (cfg.capture_pass_buffers && rounds[idx] == 0) captured[idx] = acc;
          apply_step(v.data, acc, cfg.alpha);
          acc.fill(0.0);
          ++rounds[idx];
        }
      }
      fabric.send(RegionMessage::carrying(id, WorkerId::monitor(), v.data,
                                          tile.interior, CombineMode::Replace,
                                          PhaseTag::Snapshot));
      if (cfg.stop_tolerance) {
        const RegionMessage ctl =
            fabric.await_region(id, PhaseTag::Control, WorkerId::monitor());
        if (ctl.payload.at(0) != 0.0) break;
      }
    }
    final_tiles[idx] = std::move(v.data);
  };

  auto monitor = [&] {
    Volume full = Volume::zeros(slices, problem.extent);
    full.pitch_y = problem.pitch_y;
    full.pitch_x = problem.pitch_x;
    full.slice_thickness = problem.slice_thickness;
    double previous = 0.0;
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
      const double cost = total_cost(problem, full);
      result.log.push_back({it + 1, cost, latest});
      const bool stop = it > 0 && should_stop(cfg, previous, cost);
      previous = cost;
      if (cfg.stop_tolerance) {
        for (int r = 0; r < mesh.rows; ++r) {
          for (int c = 0; c < mesh.cols; ++c) {
            fabric.send(control_message({r, c}, stop));
          }
        }
      }
      if (stop) break;
    }
  };

  fabric.run(worker, monitor);

  std::vector<std::pair<TileSpec, RegionArray>> parts;
  parts.reserve(k);
  for (std::size_t i = 0; i < k; ++i) parts.emplace_back(tiles[i], std::move(final_tiles[i]));
  result.volume = Volume{stitch(parts, problem.extent), problem.extent,
                         problem.pitch_y, problem.pitch_x,
                         problem.slice_thickness};
  result.timing = fabric.timing();
  result.trace = fabric.trace();
  result.pass_buffers = std::move(captured);
  result.pass_rounds = rounds.empty() ? 0 : rounds.front();
  return result;
}

ReconResult reference_reconstruct(const ReconProblem& problem,
                                  const ReconConfig& cfg) {
  validate_problem(problem, cfg);
  ReconResult result;
  const MeshSpec single{1, 1};
  const auto tiles = decompose_mesh(problem.extent, single, 0, problem.scan);
  const TileSpec& tile = tiles.front();
  const int steps = static_cast<int>(tile.probe_indices.size());
  const ResolvedSchedule schedule =
      resolve_schedule(cfg.passes, steps, &result.warnings);
  result.tiles = tiles;
  result.probe_steps = steps;

  const int slices = problem.slices;
  Volume v{initial_volume(slices, tile.extended, cfg, problem.extent),
           problem.extent, problem.pitch_y, problem.pitch_x,
           problem.slice_thickness};
  RegionArray acc(slices, tile.extended);
  WorkerTiming timing;
  double previous = 0.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int step = 0; step < steps; ++step) {
      const auto t0 = Clock::now();
      probe_step(problem, cfg, tile.probe_indices[static_cast<std::size_t>(step)], v, acc);
      timing.compute += cfg.timing == TimingMode::Simulated
                            ? cfg.cost.per_probe
                            : std::chrono::duration<double>(Clock::now() - t0).count();
      if (schedule.fires(it, step)) {
        if (cfg.capture_pass_buffers && result.pass_rounds == 0) {
          result.pass_buffers.push_back(acc);
        }
        apply_step(v.data, acc, cfg.alpha);
        acc.fill(0.0);
        ++result.pass_rounds;
      }
    }
    const double cost = total_cost(problem, v);
    result.log.push_back({it + 1, cost, timing.compute});
    const bool stop = it > 0 && should_stop(cfg, previous, cost);
    previous = cost;
    if (stop) break;
  }
  result.volume = std::move(v);
  result.timing.workers.push_back(timing);
  return result;
}

TimingBreakdown timing_report(const ReconResult& run) { return run.timing; }

}  // namespace ptychotile
