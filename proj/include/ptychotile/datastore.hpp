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

/// \file datastore.hpp
/// Synthetic phantoms, the binary dataset and volume formats, CSV logs,
/// PGM renders and image metrics.
///
/// Dataset file, all fields little-endian:
///   "PTYG" u16 version u16 flags
///   u32 detector, probes, scan_rows, scan_cols
///   i32 step_y, step_x, origin_y, origin_x, radius
///   u32 slices, height, width
///   f64 pitch_y, pitch_x, slice_thickness
///   u64 seed
///   f64 aperture, rolloff, defocus, sigma, propagator, dose
/// followed by one float32 row-major N x N magnitude array per probe in
/// scan order.
///
/// Volume file: "PTYV" u16 version u16 reserved, u32 slices, height, width,
/// f64 pitch_y, pitch_x, slice_thickness, then float32 data slice by slice.

#include <cstdint>
#include <string>
#include <vector>

#include "ptychotile/baseline.hpp"
#include "ptychotile/optics.hpp"
#include "ptychotile/runtime.hpp"

namespace ptychotile {

/// Lattice of Gaussian blobs with seeded jitter, one blob per
/// atom_spacing x atom_spacing cell, values in [0, amplitude].
Volume make_phantom(int slices, Extent extent, double pitch,
                    double atom_spacing, double amplitude, std::uint64_t seed);

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::uint16_t kVolumeVersion = 1;
inline constexpr std::uint16_t kFlagNoise = 1;
inline constexpr std::size_t kDatasetHeaderSize = 136;
inline constexpr std::size_t kVolumeHeaderSize = 44;

struct DatasetHeader {
  std::uint16_t version = kDatasetVersion;
  std::uint16_t flags = 0;
  std::uint32_t detector = 64;
  std::uint32_t probes = 0;
  std::uint32_t scan_rows = 0;
  std::uint32_t scan_cols = 0;
  std::int32_t step_y = 0;
  std::int32_t step_x = 0;
  std::int32_t origin_y = 0;
  std::int32_t origin_x = 0;
  std::int32_t radius = 0;
  std::uint32_t slices = 1;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  double pitch_y = 10.0;
  double pitch_x = 10.0;
  double slice_thickness = 125.0;
  std::uint64_t seed = 0;
  double aperture = 0.1;
  double rolloff = 0.0;
  double defocus = 0.0;
  double sigma = 1.0;
  double propagator = 0.0;
  double dose = 1.0e6;

  bool noisy() const { return (flags & kFlagNoise) != 0; }
  ProbeParams probe_params() const;
  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Measurement> measurements;
};

/// Header fields describing `scan`, `probe` and a volume shape.
DatasetHeader make_header(const ScanPattern& scan, const ProbeParams& probe,
                          int slices, Extent extent, double pitch_y,
                          double pitch_x, double slice_thickness);

void write_dataset(const std::string& path, const DatasetHeader& header,
                   const std::vector<Measurement>& measurements);
/// Throws BadMagic, VersionMismatch, TruncatedFile or IoError.
Dataset read_dataset(const std::string& path);

/// Scan, probe and measurements of a dataset, ready to reconstruct.
ReconProblem problem_from_dataset(const Dataset& dataset);

void write_volume(const std::string& path, const Volume& volume);
Volume read_volume(const std::string& path);

struct BorderLine {
  bool vertical = false;  // x = position when vertical, else y = position
  int position = 0;
};

struct SeamScore {
  double value = 0.0;
  std::vector<BorderLine> borders;
};

/// Mean squared first difference across internal tile borders divided by
/// the same over all other lines, both directions pooled. 0 when the
/// volume has no variation at all.
SeamScore seam_score(const Volume& volume, const std::vector<TileSpec>& tiles);

double rmse(const Volume& a, const Volume& b);

/// max - min over all voxels.
double dynamic_range(const Volume& v);

void write_convergence_csv(const std::string& path,
                           const std::vector<ConvergenceRow>& log);
std::vector<ConvergenceRow> read_convergence_csv(const std::string& path);
void write_timing_csv(const std::string& path, const TimingBreakdown& timing);
void write_memory_csv(const std::string& path, const MemoryReport& report);

/// 8-bit P5 image of one slice, min-max normalised (uniform 0 when flat).
std::vector<std::uint8_t> render_pgm(const Volume& volume, int slice);
void write_pgm(const std::string& path, const Volume& volume, int slice);

void write_text(const std::string& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const std::string& path);

/// %.17g, so values round-trip through text.
std::string format_double(double v);

}  // namespace ptychotile
