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
#include "ptychotile/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "ptychotile/datastore.hpp"
#include "ptychotile/error.hpp"
#include "ptychotile/gradients.hpp"
#include "ptychotile/passes.hpp"

namespace ptychotile {
namespace {

std::string mesh_name(MeshSpec m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

void finish(CheckReport& r, bool below) {
  r.passed = below ? r.metric <= r.threshold : r.metric > r.threshold;
  std::ostringstream os;
  os << r.name << ": worst " << sci(r.metric) << (below ? " <= " : " > ")
     << sci(r.threshold) << " -> " << (r.passed ? "PASS" : "FAIL");
  r.lines.push_back(os.str());
}

BufferMesh load_buffers(const AccumulationCase& c,
                        const std::vector<RegionArray>& grads, int slices) {
  BufferMesh m = BufferMesh::zeros(c.mesh, c.tiles, slices);
  for (std::size_t t = 0; t < c.tiles.size(); ++t) {
    for (int i : c.tiles[t].probe_indices) {
      m.buffers[t].data.add(grads[static_cast<std::size_t>(i)]);
    }
  }
  return m;
}

double max_abs_diff(const RegionArray& a, const RegionArray& b) {
  if (a.slices() != b.slices() || !(a.region() == b.region())) {
    return std::numeric_limits<double>::infinity();
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

double max_abs(const RegionArray& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

AccumulationCase accumulation_case(MeshSpec mesh, double overlap_ratio) {
  int radius = 0;
  int step = 0;
  int interior = 0;
  if (std::abs(overlap_ratio - 0.75) < 1e-9) {
    radius = 8;
    step = 4;
    interior = 12;
  } else if (std::abs(overlap_ratio - 1.0 / 3.0) < 1e-9) {
    radius = 12;
    step = 16;
    interior = 24;
  } else {
    throw ConfigError("supported overlap ratios are 1/3 and 3/4");
  }
  AccumulationCase c;
  c.mesh = mesh;
  // At least two interiors per side so a 1-wide mesh still holds a scan.
  c.extent = {std::max(mesh.rows, 2) * interior, std::max(mesh.cols, 2) * interior};
  const int rows = (c.extent.height - 1 - 2 * radius) / step + 1;
  const int cols = (c.extent.width - 1 - 2 * radius) / step + 1;
  c.scan = build_raster_scan(rows, cols, step, {radius, radius}, radius,
                             c.extent);
  const int halo = minimal_halo(c.extent, mesh, c.scan);
  c.tiles = decompose_mesh(c.extent, mesh, halo, c.scan);
  return c;
}

std::vector<RegionArray> random_circle_gradients(const ScanPattern& scan,
                                                 int slices,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<RegionArray> out;
  out.reserve(scan.size());
  for (const auto& loc : scan.locations) {
    RegionArray g(slices, circle_support(loc, scan.radius));
    for (double& v : g.values()) v = u(rng);
    out.push_back(mask_to_circle(std::move(g), loc, scan.radius));
  }
  return out;
}

CheckReport check_gradient_fd(int seeds, double tolerance) {
  CheckReport r{"gradient-fd", false, 0.0, tolerance, {}};
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 7919 + 11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = (seed % 2 == 0) ? 16 : 32;
    const int slices = 1 + seed % 3;
    const int margin = 4;
    const Extent extent{n + 2 * margin, n + 2 * margin};
    ProbeParams p;
    p.grid_size = n;
    p.aperture_semiangle = 0.15 + 0.2 * u(rng);
    p.aperture_rolloff = 0.3;
    p.defocus = 30.0 * u(rng);
    p.interaction_constant = 0.5 + u(rng);
    p.propagator = 10.0 * u(rng);
    const Probe probe = make_probe(p);
    const ProbeLocation loc{0, n / 2 + margin + static_cast<int>(u(rng) * 2 * margin) - margin,
                            n / 2 + margin + static_cast<int>(u(rng) * 2 * margin) - margin};
    Volume v = Volume::zeros(slices, extent);
    Volume truth = Volume::zeros(slices, extent);
    for (double& x : v.data.values()) x = 0.5 * u(rng);
    for (double& x : truth.data.values()) x = 0.5 * u(rng);
    const Measurement y = diffract(multislice_propagate(probe, loc, truth));

    const GradField adj = grad(y, probe, loc, v);
    const GradField fd = grad_fd_oracle(y, probe, loc, v, 1e-5);
    const double err = relative_l2(adj, fd);
    r.metric = std::max(r.metric, err);
    std::ostringstream os;
    os << "  seed " << seed << " N=" << n << " S=" << slices << " rel L2 "
       << sci(err);
    r.lines.push_back(os.str());
  }
  finish(r, true);
  return r;
}

CheckReport check_accumulation(int seeds, double tolerance) {
  CheckReport r{"accumulation", false, 0.0, tolerance, {}};
  const int slices = 2;
  for (MeshSpec mesh : {MeshSpec{2, 2}, MeshSpec{3, 3}, MeshSpec{4, 3}}) {
    for (double ratio : {1.0 / 3.0, 0.75}) {
      const AccumulationCase c = accumulation_case(mesh, ratio);
      for (int seed = 0; seed < seeds; ++seed) {
        const auto grads = random_circle_gradients(c.scan, slices,
                                                   static_cast<std::uint64_t>(seed));
        const BufferMesh out = full_pass(load_buffers(c, grads, slices));
        const RegionArray oracle = global_sum_oracle(grads, c.extent, slices);
        const double dev = max_relative_deviation(out, oracle);
        r.metric = std::max(r.metric, dev);
        std::ostringstream os;
        os << "  mesh " << mesh_name(mesh) << " overlap " << ratio << " seed "
           << seed << " probes " << c.scan.size() << " max rel dev " << sci(dev);
        r.lines.push_back(os.str());
      }
    }
  }
  finish(r, true);
  return r;
}

CheckReport check_neighbor_insufficiency(int seeds, double threshold) {
  CheckReport r{"neighbor-insufficiency", false, 0.0, threshold, {}};
  const int slices = 2;
  const AccumulationCase c = accumulation_case({3, 3}, 0.75);
  r.metric = std::numeric_limits<double>::infinity();
  for (int seed = 0; seed < seeds; ++seed) {
    const auto grads =
        random_circle_gradients(c.scan, slices, static_cast<std::uint64_t>(seed));
    const BufferMesh out = neighbor_add_exchange(load_buffers(c, grads, slices));
    const RegionArray oracle = global_sum_oracle(grads, c.extent, slices);
    const double dev = max_relative_deviation(out, oracle);
    // The weakest detection over all seeds is what must clear the bar.
    r.metric = std::min(r.metric, dev);
    std::ostringstream os;
    os << "  mesh 3x3 overlap 0.75 seed " << seed
       << " neighbour-add max rel dev " << sci(dev);
    r.lines.push_back(os.str());
  }
  finish(r, false);
  return r;
}

ReconProblem small_problem(MeshSpec mesh, double overlap_ratio, int slices,
                           std::uint64_t seed) {
  const AccumulationCase c = accumulation_case(mesh, overlap_ratio);
  ReconProblem p;
  p.extent = c.extent;
  p.slices = slices;
  p.scan = c.scan;
  ProbeParams pp;
  pp.grid_size = 16;
  pp.aperture_semiangle = 0.25;
  pp.aperture_rolloff = 0.5;
  pp.defocus = 5.0;
  pp.propagator = 5.0;
  p.probe = make_probe(pp);
  const Volume truth = make_phantom(slices, c.extent, 10.0, 6.0, 0.5, seed);
  p.measurements = simulate_measurements(truth, p.scan, p.probe);
  return p;
}

CheckReport check_runtime_vs_reference(int seeds, double tolerance) {
  CheckReport r{"runtime-vs-reference", false, 0.0, tolerance, {}};
  const int slices = 2;
  struct Case {
    MeshSpec mesh;
    double ratio;
  };
  const std::vector<Case> cases = {{{1, 1}, 0.75}, {{2, 2}, 0.75},
                                   {{3, 3}, 0.75}, {{4, 3}, 0.75},
                                   {{2, 3}, 1.0 / 3.0}, {{3, 3}, 1.0 / 3.0}};
  for (const Case& k : cases) {
    for (int seed = 0; seed < seeds; ++seed) {
      const ReconProblem problem =
          small_problem(k.mesh, k.ratio, slices, static_cast<std::uint64_t>(seed));
      ReconConfig cfg;
      cfg.iterations = 1;
      cfg.passes = PassSchedule::once();
      cfg.alpha = StepSize(0.0);
      cfg.init_noise = 0.05;
      cfg.seed = static_cast<std::uint64_t>(seed) + 1;
      cfg.capture_pass_buffers = true;

      // Sequential reference: per-tile sums of masked probe gradients on
      // the tile's own volume, then the four passes.
      const auto tiles = decompose_mesh(
          problem.extent, k.mesh,
          minimal_halo(problem.extent, k.mesh, problem.scan), problem.scan);
      BufferMesh ref = BufferMesh::zeros(k.mesh, tiles, slices);
      for (std::size_t t = 0; t < tiles.size(); ++t) {
        const Volume vt{initial_volume(slices, tiles[t].extended, cfg, problem.extent),
                        problem.extent};
        for (int i : tiles[t].probe_indices) {
          const auto& loc = problem.scan.locations[static_cast<std::size_t>(i)];
          ref.buffers[t].data.add(mask_to_circle(
              grad(problem.measurements[static_cast<std::size_t>(i)],
                   problem.probe, loc, vt),
              loc, problem.scan.radius));
        }
      }
      ref = full_pass(std::move(ref));
      double scale = 0.0;
      for (const auto& b : ref.buffers) scale = std::max(scale, max_abs(b.data));
      if (scale == 0.0) scale = 1.0;

      for (bool deterministic : {true, false}) {
        cfg.deterministic = deterministic;
        const ReconResult run = appp_reconstruct(problem, k.mesh, cfg);
        double dev = 0.0;
        for (std::size_t t = 0; t < tiles.size(); ++t) {
          dev = std::max(dev, max_abs_diff(run.pass_buffers.at(t),
                                           ref.buffers[t].data) / scale);
        }
        r.metric = std::max(r.metric, dev);
        std::ostringstream os;
        os << "  mesh " << mesh_name(k.mesh) << " overlap " << k.ratio
           << (deterministic ? " baton" : " threads") << " seed " << seed
           << " max rel dev " << sci(dev);
        r.lines.push_back(os.str());
      }
    }
  }
  finish(r, true);
  return r;
}

CheckReport check_message_budget() {
  CheckReport r{"message-budget", false, 0.0, 0.0, {}};
  bool counts_ok = true;
  bool witness = false;
  for (MeshSpec mesh : {MeshSpec{2, 2}, MeshSpec{3, 3}, MeshSpec{4, 3},
                        MeshSpec{3, 4}, MeshSpec{1, 3}}) {
    const ReconProblem problem = small_problem(mesh, 0.75, 1, 0);
    ReconConfig cfg;
    cfg.iterations = 2;
    cfg.passes = PassSchedule::once();
    cfg.alpha = StepSize(0.0);
    const ReconResult run = appp_reconstruct(problem, mesh, cfg);
    const std::int64_t per_pass = 2LL * (mesh.rows - 1) * mesh.cols +
                                  2LL * (mesh.cols - 1) * mesh.rows;
    const std::int64_t observed = run.timing.total_messages();
    const bool ok = observed == per_pass * run.pass_rounds;
    counts_ok = counts_ok && ok;
    r.metric = std::max(r.metric,
                        std::abs(static_cast<double>(observed - per_pass * run.pass_rounds)));

    // Witness: a horizontal-forward send that precedes the last
    // vertical-backward send of some other column.
    std::vector<std::int64_t> last_vbwd(static_cast<std::size_t>(mesh.cols), -1);
    for (const auto& e : run.trace) {
      if (e.kind == EventKind::Send && e.tag == PhaseTag::VBwd) {
        auto& l = last_vbwd[static_cast<std::size_t>(e.agent % mesh.cols)];
        l = std::max(l, e.seq);
      }
    }
    bool here = false;
    for (const auto& e : run.trace) {
      if (e.kind != EventKind::Send || e.tag != PhaseTag::HFwd) continue;
      const int col = e.agent % mesh.cols;
      for (int c = 0; c < mesh.cols; ++c) {
        if (c != col && e.seq < last_vbwd[static_cast<std::size_t>(c)]) here = true;
      }
    }
    witness = witness || here;
    std::ostringstream os;
    os << "  mesh " << mesh_name(mesh) << ": " << observed << " messages over "
       << run.pass_rounds << " passes, expected " << per_pass << " per pass"
       << (ok ? "" : " MISMATCH") << (here ? "; pipelining witness found" : "");
    r.lines.push_back(os.str());
  }
  r.passed = counts_ok && witness;
  r.lines.push_back(std::string("message-budget: counts ") +
                    (counts_ok ? "match" : "differ") + ", pipelining witness " +
                    (witness ? "found" : "missing") + " -> " +
                    (r.passed ? "PASS" : "FAIL"));
  return r;
}

}  // namespace ptychotile
