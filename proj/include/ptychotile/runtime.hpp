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

/// \file runtime.hpp
/// Tiled gradient-decomposition reconstruction on a mesh of message-passing
/// workers, with delayed gradient accumulation and pipelined directional
/// passes.
///
/// Each worker owns one halo-extended tile and an accumulation buffer of
/// the same shape. Per assigned probe it computes the probe gradient on its
/// tile, adds it to the buffer and takes a local step. Whenever the pass
/// schedule fires, the buffers go through the vertical forward/backward and
/// horizontal forward/backward chains, every worker steps along the agreed
/// accumulated gradient and clears the buffer. A worker starts its
/// horizontal chain as soon as its own vertical obligations are met; there
/// is no global barrier.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ptychotile/fabric.hpp"
#include "ptychotile/geometry.hpp"
#include "ptychotile/gradients.hpp"
#include "ptychotile/optics.hpp"
#include "ptychotile/passes.hpp"

namespace ptychotile {

/// Everything a reconstruction needs: scan, probe and measured magnitudes.
struct ReconProblem {
  Extent extent;
  int slices = 1;
  ScanPattern scan;
  Probe probe;
  std::vector<Measurement> measurements;  // in scan order
  double pitch_y = 10.0;
  double pitch_x = 10.0;
  double slice_thickness = 125.0;
};

/// F(V): the sum of per-probe losses.
double total_cost(const ReconProblem& problem, const Volume& volume);

/// When the accumulated passes fire.
struct PassSchedule {
  enum class Kind { EveryT, PerIteration, Never };
  Kind kind = Kind::PerIteration;
  int value = 1;

  /// Passes after every `t` probe steps (the step counter runs on across
  /// iterations).
  static PassSchedule every(int t) { return {Kind::EveryT, t}; }
  static PassSchedule per_probe() { return every(1); }
  /// Passes `n` times per iteration, at evenly spread probe steps.
  static PassSchedule per_iteration(int n) { return {Kind::PerIteration, n}; }
  static PassSchedule once() { return per_iteration(1); }
  static PassSchedule twice() { return per_iteration(2); }
  static PassSchedule never() { return {Kind::Never, 0}; }
};

struct ReconConfig {
  int iterations = 100;
  PassSchedule passes = PassSchedule::once();
  StepSize alpha{1.0};
  std::uint64_t seed = 0;
  bool deterministic = true;
  /// Halo width in voxels; negative selects the smallest covering halo.
  int halo = -1;
  /// Zero each probe gradient outside its scan circle.
  bool mask_gradients = true;
  /// Stop once the relative cost decrease of an iteration drops below this.
  std::optional<double> stop_tolerance;
  /// Amplitude of the uniform random initial volume (0: start from zero).
  double init_noise = 0.0;
  TimingMode timing = TimingMode::Simulated;
  CostModel cost;
  /// Keep each worker's accumulated buffer right after its first pass.
  bool capture_pass_buffers = false;
  bool record_trace = true;
};

struct ConvergenceRow {
  int iteration = 0;
  double cost = 0.0;
  double sim_time = 0.0;

  friend bool operator==(const ConvergenceRow&, const ConvergenceRow&) = default;
};

struct ReconResult {
  Volume volume;
  std::vector<ConvergenceRow> log;
  TimingBreakdown timing;
  std::vector<TraceEvent> trace;
  std::vector<TileSpec> tiles;
  std::vector<std::string> warnings;
  /// Buffers after the first full pass (when capture_pass_buffers is set),
  /// in mesh order.
  std::vector<RegionArray> pass_buffers;
  int pass_rounds = 0;  // full passes per worker
  int probe_steps = 0;  // schedule steps per iteration (max probes per tile)

  double final_cost() const { return log.empty() ? 0.0 : log.back().cost; }
};

/// Number of schedule steps between passes implied by `schedule` for a
/// mesh whose busiest tile has `steps_per_iteration` probes; appends a
/// warning when an oversized period collapses to once per iteration.
/// Returns 0 for a schedule without passes.
struct ResolvedSchedule {
  PassSchedule::Kind kind = PassSchedule::Kind::PerIteration;
  int period = 0;  // EveryT
  int per_iteration = 0;
  int steps_per_iteration = 0;

  /// True when passes run after the (0-based) `step` of `iteration`.
  bool fires(int iteration, int step) const;
};
ResolvedSchedule resolve_schedule(const PassSchedule& schedule,
                                  int steps_per_iteration,
                                  std::vector<std::string>* warnings);

/// Image-gradient decomposition on `mesh`: runs one agent per tile on a
/// MessageFabric (deterministic baton scheduler or free-running threads)
/// plus a monitor that stitches interiors after each iteration and logs
/// F(V). Throws CoverageError if the halo does not cover the probe circles.
ReconResult appp_reconstruct(const ReconProblem& problem, MeshSpec mesh,
                             const ReconConfig& cfg);

/// The same schedule for one worker, run directly without a fabric.
ReconResult reference_reconstruct(const ReconProblem& problem,
                                  const ReconConfig& cfg);

/// Per-worker compute / wait / communication tallies of a finished run.
TimingBreakdown timing_report(const ReconResult& run);

/// Initial volume (zeros, or seeded uniform noise) over `region`.
RegionArray initial_volume(int slices, const Rect& region,
                           const ReconConfig& cfg, Extent extent);

}  // namespace ptychotile
