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
#include "ptychotile/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ptychotile/baseline.hpp"
#include "ptychotile/datastore.hpp"
#include "ptychotile/error.hpp"
#include "ptychotile/runtime.hpp"
#include "ptychotile/verify.hpp"

namespace ptychotile {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Pair {
  int a = 0;
  int b = 0;
};

Pair parse_pair(const std::string& text, const char* what) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_a = 0;
    std::size_t used_b = 0;
    const std::string sa = text.substr(0, x);
    const std::string sb = text.substr(x + 1);
    Pair p{std::stoi(sa, &used_a), std::stoi(sb, &used_b)};
    if (used_a != sa.size() || used_b != sb.size()) throw std::invalid_argument(text);
    if (p.a <= 0 || p.b <= 0) throw std::invalid_argument(text);
    return p;
  } catch (const std::logic_error&) {
    throw ConfigError(std::string(what) + " must look like RxC with positive sides, got '" +
                      text + "'");
  }
}

PassSchedule parse_schedule(const std::string& text) {
  auto number_after = [&](const std::string& prefix) {
    try {
      std::size_t used = 0;
      const std::string rest = text.substr(prefix.size());
      const int n = std::stoi(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(text);
      return n;
    } catch (const std::logic_error&) {
      throw ConfigError("bad pass frequency '" + text + "'");
    }
  };
  if (text == "per-probe") return PassSchedule::per_probe();
  if (text == "once") return PassSchedule::once();
  if (text == "twice") return PassSchedule::twice();
  if (text == "never") return PassSchedule::never();
  if (text.rfind("K-per-iter:", 0) == 0) {
    return PassSchedule::per_iteration(number_after("K-per-iter:"));
  }
  if (text.rfind("every:", 0) == 0) return PassSchedule::every(number_after("every:"));
  throw ConfigError("unknown pass frequency '" + text + "'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string out;
  std::string scan = "7x7";
  int step = 10;
  int radius = 20;
  int detector = 64;
  int slices = 2;
  std::string volume = "128x128";
  std::string noise = "none";
  std::uint64_t seed = 1;
  double dose = 1.0e6;
  double pitch = 10.0;
  double slice_thickness = 125.0;
  double atom_spacing = 8.0;
  double amplitude = 0.5;
  double aperture = 0.15;
  double rolloff = 0.5;
  double defocus = 100.0;
  double sigma = 1.0;
  double propagator = 20.0;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const Pair scan_dims = parse_pair(o.scan, "--scan");
  const Pair vol = parse_pair(o.volume, "--volume");
  if (o.slices < 1) throw ConfigError("--slices must be >= 1");
  if (o.detector < 2) throw ConfigError("--detector must be >= 2");
  if (o.noise != "none" && o.noise != "poisson") {
    throw ConfigError("--noise must be none or poisson");
  }
  const Extent extent{vol.a, vol.b};
  // Centre the scan grid on the volume.
  const Point origin{(extent.height - (scan_dims.a - 1) * o.step) / 2,
                     (extent.width - (scan_dims.b - 1) * o.step) / 2};
  const ScanPattern scan = build_raster_scan(scan_dims.a, scan_dims.b, o.step,
                                             origin, o.radius, extent);
  ProbeParams pp;
  pp.grid_size = o.detector;
  pp.aperture_semiangle = o.aperture;
  pp.aperture_rolloff = o.rolloff;
  pp.defocus = o.defocus;
  pp.interaction_constant = o.sigma;
  pp.propagator = o.propagator;
  const Probe probe = make_probe(pp);

  Volume phantom = make_phantom(o.slices, extent, o.pitch, o.atom_spacing,
                                o.amplitude, o.seed);
  phantom.slice_thickness = o.slice_thickness;
  NoiseSpec noise;
  noise.enabled = o.noise == "poisson";
  noise.dose = o.dose;
  noise.seed = o.seed;
  const auto measurements = simulate_measurements(phantom, scan, probe, noise);

  DatasetHeader h = make_header(scan, pp, o.slices, extent, o.pitch, o.pitch,
                                o.slice_thickness);
  h.flags = noise.enabled ? kFlagNoise : 0;
  h.seed = o.seed;
  h.dose = o.dose;

  ensure_dir(o.out);
  const std::string data_path = join(o.out, "dataset.ptyg");
  const std::string phantom_path = join(o.out, "phantom.ptyv");
  write_dataset(data_path, h, measurements);
  write_volume(phantom_path, phantom);

  Json m;
  m["command"] = "simulate";
  m["flags"] = {{"out", o.out},
                {"scan", o.scan},
                {"step", o.step},
                {"radius", o.radius},
                {"detector", o.detector},
                {"slices", o.slices},
                {"volume", o.volume},
                {"noise", o.noise},
                {"seed", o.seed},
                {"dose", o.dose},
                {"pitch", o.pitch},
                {"slice_thickness", o.slice_thickness},
                {"atom_spacing", o.atom_spacing},
                {"amplitude", o.amplitude},
                {"aperture", o.aperture},
                {"rolloff", o.rolloff},
                {"defocus", o.defocus},
                {"sigma", o.sigma},
                {"propagator", o.propagator}};
  m["derived"] = {{"origin", {origin.y, origin.x}},
                  {"probes", scan.size()},
                  {"overlap_ratio", scan.overlap_ratio()},
                  {"dataset_bytes",
                   kDatasetHeaderSize + scan.size() * static_cast<std::size_t>(o.detector) *
                                            static_cast<std::size_t>(o.detector) * 4}};
  m["files"] = {{"dataset", "dataset.ptyg"}, {"phantom", "phantom.ptyv"}};
  write_text(join(o.out, "manifest.json"), m.dump(2) + "\n");
  out << "wrote " << scan.size() << " measurements to " << data_path << "\n";
  return kExitOk;
}

// ------------------------------------------------------------- reconstruct

struct ReconstructOptions {
  std::string data;
  std::string out;
  std::string mode = "grad-decomp";
  std::string mesh = "3x3";
  int iters = 100;
  std::string pass_freq = "once";
  double alpha = 2.0;
  int halo = -1;
  int extra_rows = 2;
  bool deterministic = true;
  std::uint64_t seed = 0;
  double init_noise = 0.0;
  std::string timing = "simulated";
  std::optional<double> stop_tol;
};

int cmd_reconstruct(const ReconstructOptions& o, bool mesh_given,
                    std::ostream& out, std::ostream& err) {
  if (o.mode != "single" && o.mode != "grad-decomp" && o.mode != "halo-exchange") {
    throw ConfigError("--mode must be single, grad-decomp or halo-exchange");
  }
  if (o.timing != "simulated" && o.timing != "wall") {
    throw ConfigError("--timing must be simulated or wall");
  }
  const Pair mesh_dims = parse_pair(o.mesh, "--mesh");
  ReconConfig cfg;
  cfg.iterations = o.iters;
  cfg.passes = parse_schedule(o.pass_freq);
  cfg.alpha = StepSize(o.alpha);
  cfg.seed = o.seed;
  cfg.deterministic = o.deterministic;
  cfg.halo = o.halo;
  cfg.init_noise = o.init_noise;
  cfg.stop_tolerance = o.stop_tol;
  cfg.timing = o.timing == "wall" ? TimingMode::WallClock : TimingMode::Simulated;
  cfg.record_trace = false;
  if (cfg.iterations < 1) throw ConfigError("--iters must be >= 1");

  const Dataset dataset = read_dataset(o.data);
  const ReconProblem problem = problem_from_dataset(dataset);
  const MeshSpec mesh{mesh_dims.a, mesh_dims.b};

  ReconResult run;
  MemoryReport memory;
  std::vector<std::string> warnings;
  if (o.mode == "single") {
    if (mesh_given) warnings.push_back("--mode single ignores --mesh");
    run = reference_reconstruct(problem, cfg);
    memory = memory_report(run.tiles, problem.slices, problem.probe.params.grid_size);
  } else if (o.mode == "grad-decomp") {
    run = appp_reconstruct(problem, mesh, cfg);
    memory = memory_report(run.tiles, problem.slices, problem.probe.params.grid_size);
  } else {
    HveResult hve = hve_reconstruct(problem, mesh, cfg, o.extra_rows);
    run = std::move(hve.run);
    memory = std::move(hve.memory);
  }
  warnings.insert(warnings.end(), run.warnings.begin(), run.warnings.end());
  for (const auto& w : warnings) err << "warning: " << w << "\n";

  ensure_dir(o.out);
  write_volume(join(o.out, "volume.ptyv"), run.volume);
  write_convergence_csv(join(o.out, "convergence.csv"), run.log);
  write_timing_csv(join(o.out, "timing.csv"), run.timing);
  write_memory_csv(join(o.out, "memory.csv"), memory);

  Json m;
  m["command"] = "reconstruct";
  Json flags = {{"data", o.data},
                {"out", o.out},
                {"mode", o.mode},
                {"mesh", o.mesh},
                {"iters", o.iters},
                {"pass_freq", o.pass_freq},
                {"alpha", o.alpha},
                {"halo", o.halo},
                {"extra_rows", o.extra_rows},
                {"deterministic", o.deterministic},
                {"seed", o.seed},
                {"init_noise", o.init_noise},
                {"timing", o.timing}};
  flags["stop_tol"] = o.stop_tol ? Json(*o.stop_tol) : Json(nullptr);
  m["flags"] = flags;
  m["result"] = {{"iterations_run", run.log.size()},
                 {"final_cost", run.final_cost()},
                 {"pass_rounds", run.pass_rounds},
                 {"probe_steps", run.probe_steps},
                 {"messages", run.timing.total_messages()},
                 {"tiles", run.tiles.size()}};
  m["warnings"] = warnings;
  m["files"] = {{"volume", "volume.ptyv"},
                {"convergence", "convergence.csv"},
                {"timing", "timing.csv"},
                {"memory", "memory.csv"}};
  write_text(join(o.out, "manifest.json"), m.dump(2) + "\n");
  out << o.mode << ": " << run.log.size() << " iterations, final cost "
      << format_double(run.final_cost()) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ verify

int cmd_verify(const std::vector<std::string>& checks, int seeds,
               std::ostream& out) {
  bool all_passed = true;
  auto run = [&](const std::string& name) {
    CheckReport r;
    if (name == "gradient-fd") {
      r = check_gradient_fd(seeds > 0 ? seeds : 20);
    } else if (name == "accumulation") {
      r = check_accumulation(seeds > 0 ? seeds : 3);
    } else if (name == "neighbor-insufficiency") {
      r = check_neighbor_insufficiency(seeds > 0 ? seeds : 3);
    } else if (name == "runtime-vs-reference") {
      r = check_runtime_vs_reference(seeds > 0 ? seeds : 1);
    } else if (name == "message-budget") {
      r = check_message_budget();
    } else {
      throw ConfigError("unknown check '" + name + "'");
    }
    for (const auto& l : r.lines) out << l << "\n";
    all_passed = all_passed && r.passed;
  };
  for (const auto& c : checks) {
    if (c == "all") {
      for (const char* n : {"gradient-fd", "accumulation", "neighbor-insufficiency",
                            "runtime-vs-reference", "message-budget"}) {
        run(n);
      }
    } else {
      run(c);
    }
  }
  return all_passed ? kExitOk : kExitVerifyFailed;
}

// ------------------------------------------------------------------ render

int cmd_render(const std::string& volume_path, int slice,
               const std::string& out_path, std::ostream& out) {
  const Volume v = read_volume(volume_path);
  write_pgm(out_path, v, slice);
  out << "wrote slice " << slice << " to " << out_path << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- metrics

struct MetricsOptions {
  std::string seam;
  std::string mesh = "3x3";
  std::vector<std::string> compare;
  bool memory = false;
  std::string data;
  int halo = -1;
  int extra_rows = 2;
  std::string out;
};

int cmd_metrics(const MetricsOptions& o, std::ostream& out, std::ostream& err) {
  const int selected = (!o.seam.empty()) + (!o.compare.empty()) + (o.memory ? 1 : 0);
  if (selected != 1) {
    throw ConfigError("choose exactly one of --seam, --compare-convergence, --memory");
  }
  std::ostringstream report;
  if (!o.seam.empty()) {
    const Pair m = parse_pair(o.mesh, "--mesh");
    const Volume v = read_volume(o.seam);
    const MeshSpec mesh{m.a, m.b};
    // Seams depend on tile interiors only; a zero halo and empty scan give
    // exactly those.
    const auto interiors = mesh_interiors(v.extent, mesh);
    std::vector<TileSpec> tiles;
    for (int r = 0; r < mesh.rows; ++r) {
      for (int c = 0; c < mesh.cols; ++c) {
        TileSpec t;
        t.mesh_r = r;
        t.mesh_c = c;
        t.interior = interiors[static_cast<std::size_t>(mesh.index(r, c))];
        t.extended = t.interior;
        tiles.push_back(t);
      }
    }
    const SeamScore s = seam_score(v, tiles);
    report << "metric,value\n";
    report << "seam_score," << format_double(s.value) << "\n";
    report << "border_lines," << s.borders.size() << "\n";
  } else if (!o.compare.empty()) {
    std::vector<std::vector<ConvergenceRow>> logs;
    std::size_t rows = 0;
    for (const auto& p : o.compare) {
      logs.push_back(read_convergence_csv(p));
      rows = std::max(rows, logs.back().size());
    }
    report << "iteration";
    for (std::size_t i = 0; i < logs.size(); ++i) report << ",cost_" << i;
    report << "\n";
    for (std::size_t r = 0; r < rows; ++r) {
      report << r + 1;
      for (const auto& log : logs) {
        report << ',';
        if (r < log.size()) report << format_double(log[r].cost);
      }
      report << "\n";
    }
  } else {
    if (o.data.empty()) throw ConfigError("--memory needs --data");
    const Pair m = parse_pair(o.mesh, "--mesh");
    const MeshSpec mesh{m.a, m.b};
    const Dataset d = read_dataset(o.data);
    const ReconProblem p = problem_from_dataset(d);
    const int halo = o.halo >= 0 ? o.halo : minimal_halo(p.extent, mesh, p.scan);
    const auto gd = memory_report(decompose_mesh(p.extent, mesh, halo, p.scan),
                                  p.slices, p.probe.params.grid_size);
    report << "method,worker,voxels,measurements,buffer_voxels,probes,total\n";
    auto emit = [&](const char* method, const MemoryReport& rep) {
      for (const auto& w : rep.workers) {
        report << method << ',' << w.id.mesh_r << ':' << w.id.mesh_c << ','
               << w.voxels << ',' << w.measurements << ',' << w.buffer_voxels
               << ',' << w.probes << ',' << w.total() << "\n";
      }
    };
    emit("grad-decomp", gd);
    try {
      emit("halo-exchange",
           memory_report(hve_decompose(p.extent, mesh, p.scan, o.extra_rows),
                         p.slices, p.probe.params.grid_size));
    } catch (const TileTooSmall& e) {
      err << "warning: " << e.what() << "\n";
      report << "halo-exchange,NA,,,,,\n";
    }
  }
  if (o.out.empty()) {
    out << report.str();
  } else {
    write_text(o.out, report.str());
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Tiled gradient-decomposition ptychography reconstruction"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic dataset and phantom");
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--scan", sim.scan, "Scan grid RxC")->capture_default_str();
  s->add_option("--step", sim.step, "Scan step in voxels")->capture_default_str();
  s->add_option("--radius", sim.radius, "Probe circle radius in voxels")->capture_default_str();
  s->add_option("--detector", sim.detector, "Detector / window side N")->capture_default_str();
  s->add_option("--slices", sim.slices, "Volume slices")->capture_default_str();
  s->add_option("--volume", sim.volume, "Lateral volume HxW")->capture_default_str();
  s->add_option("--noise", sim.noise, "none or poisson")->capture_default_str();
  s->add_option("--seed", sim.seed, "Phantom and noise seed")->capture_default_str();
  s->add_option("--dose", sim.dose, "Expected counts per probe for poisson noise")->capture_default_str();
  s->add_option("--pitch", sim.pitch, "Lateral voxel pitch (pm)")->capture_default_str();
  s->add_option("--slice-thickness", sim.slice_thickness, "Slice thickness (pm)")->capture_default_str();
  s->add_option("--atom-spacing", sim.atom_spacing, "Phantom lattice spacing (voxels)")->capture_default_str();
  s->add_option("--amplitude", sim.amplitude, "Phantom peak value")->capture_default_str();
  s->add_option("--aperture", sim.aperture, "Probe aperture radius (cycles/voxel)")->capture_default_str();
  s->add_option("--rolloff", sim.rolloff, "Aperture edge width, fraction of radius")->capture_default_str();
  s->add_option("--defocus", sim.defocus, "Probe defocus coefficient")->capture_default_str();
  s->add_option("--sigma", sim.sigma, "Interaction constant")->capture_default_str();
  s->add_option("--propagator", sim.propagator, "Slice-to-slice Fresnel coefficient")->capture_default_str();

  ReconstructOptions rec;
  auto* r = app.add_subcommand("reconstruct", "Reconstruct a volume from a dataset");
  r->add_option("--data", rec.data, "Dataset file")->required();
  r->add_option("--out", rec.out, "Output directory")->required();
  r->add_option("--mode", rec.mode, "single, grad-decomp or halo-exchange")->capture_default_str();
  auto* mesh_opt = r->add_option("--mesh", rec.mesh, "Worker mesh RxC")->capture_default_str();
  r->add_option("--iters", rec.iters, "Iterations")->capture_default_str();
  r->add_option("--pass-freq", rec.pass_freq,
                "per-probe, once, twice, K-per-iter:N, every:T or never")
      ->capture_default_str();
  r->add_option("--alpha", rec.alpha, "Step size")->capture_default_str();
  r->add_option("--halo", rec.halo, "Halo width in voxels (-1: smallest covering)")->capture_default_str();
  r->add_option("--extra-rows", rec.extra_rows, "Extra probe rows for halo-exchange")->capture_default_str();
  r->add_option("--deterministic", rec.deterministic, "Baton scheduler (true) or free threads")->capture_default_str();
  r->add_option("--seed", rec.seed, "Initial-volume seed")->capture_default_str();
  r->add_option("--init-noise", rec.init_noise, "Uniform initial-volume amplitude")->capture_default_str();
  r->add_option("--timing", rec.timing, "simulated or wall")->capture_default_str();
  r->add_option("--stop-tol", rec.stop_tol, "Relative cost-decrease stop threshold");

  std::vector<std::string> checks;
  int seeds = 0;
  auto* v = app.add_subcommand("verify", "Run property suites against their oracles");
  v->add_option("--check", checks,
                "gradient-fd, accumulation, neighbor-insufficiency, "
                "runtime-vs-reference, message-budget or all")
      ->required();
  v->add_option("--seeds", seeds, "Random instances per suite (0: suite default)");

  std::string render_volume;
  int render_slice = 0;
  std::string render_out;
  auto* g = app.add_subcommand("render", "Write one volume slice as an 8-bit PGM");
  g->add_option("--volume", render_volume, "Volume file")->required();
  g->add_option("--slice", render_slice, "Slice index")->required();
  g->add_option("--out", render_out, "Output .pgm")->required();

  MetricsOptions met;
  auto* m = app.add_subcommand("metrics", "Seam score, convergence table or memory counts");
  m->add_option("--seam", met.seam, "Volume file to score");
  m->add_option("--mesh", met.mesh, "Worker mesh RxC")->capture_default_str();
  m->add_option("--compare-convergence", met.compare, "Convergence CSV files");
  m->add_flag("--memory", met.memory, "Analytic per-worker memory counts");
  m->add_option("--data", met.data, "Dataset file (for --memory)");
  m->add_option("--halo", met.halo, "Gradient-decomposition halo (-1: smallest)");
  m->add_option("--extra-rows", met.extra_rows, "Halo-exchange extra probe rows")->capture_default_str();
  m->add_option("--out", met.out, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, out);
    if (r->parsed()) return cmd_reconstruct(rec, mesh_opt->count() > 0, out, err);
    if (v->parsed()) return cmd_verify(checks, seeds, out);
    if (g->parsed()) return cmd_render(render_volume, render_slice, render_out, out);
    if (m->parsed()) return cmd_metrics(met, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const BadMagic& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const VersionMismatch& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const TruncatedFile& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace ptychotile
