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

/// \file optics.hpp
/// Multislice forward model: a probe wavefield is transmitted through each
/// slice of a real scattering potential and Fresnel-propagated to the next,
/// then diffracted to the detector. All DFTs are unitary.

#include <cstdint>
#include <optional>
#include <vector>

#include "ptychotile/array.hpp"
#include "ptychotile/geometry.hpp"

namespace ptychotile {

/// Real scattering potential. `data.region()` says which lateral part of
/// the `extent` is stored; a tile stores only its extended rectangle.
struct Volume {
  RegionArray data;
  Extent extent;
  double pitch_y = 10.0;  // pm / voxel
  double pitch_x = 10.0;
  double slice_thickness = 125.0;  // pm

  static Volume zeros(int slices, Extent extent) {
    return {RegionArray(slices, Rect::of(extent)), extent};
  }
  int slices() const { return data.slices(); }
};

/// Probe and propagation parameters in model units. Frequencies are in
/// cycles per voxel.
struct ProbeParams {
  int grid_size = 64;               // N, the detector / window side
  double aperture_semiangle = 0.1;  // aperture radius in frequency space
  double aperture_rolloff = 0.0;    // cos^2 edge width, fraction of radius
  double defocus = 0.0;             // phase exp(-i defocus k^2)
  double interaction_constant = 1.0;  // sigma: transmission exp(i sigma V)
  double propagator = 0.0;  // Fresnel coefficient: exp(-i propagator k^2)
};

struct Probe {
  ComplexField field;
  ProbeParams params;
};

struct Measurement {
  Array2<double> magnitude;
  int probe_index = 0;
};

Probe make_probe(const ProbeParams& params);

/// Window of the probe at `loc`: N x N, with the probe centre at window
/// pixel (N/2, N/2).
Rect probe_window(const ProbeLocation& loc, int grid_size);

/// Multiplies by the Fresnel propagator exp(-i coefficient k^2) in
/// frequency space.
void free_space_propagate(ComplexField& field, double coefficient);

/// Intermediate fields of one forward evaluation, kept for the adjoint.
struct ForwardTrace {
  Rect window;
  std::vector<ComplexField> incident;      // psi_s, before slice s
  std::vector<ComplexField> transmission;  // exp(i sigma V_s) on the window
  ComplexField exit_wave;                  // psi_S
  ComplexField detector;                   // DFT(psi_S)
};

/// Runs the multislice model; voxels of the window not stored in
/// `volume.data` are treated as vacuum (V = 0). Throws WindowOutOfBounds
/// if the window leaves `volume.extent`.
ForwardTrace multislice_forward(const Probe& probe, const ProbeLocation& loc,
                                const Volume& volume);

ComplexField multislice_propagate(const Probe& probe, const ProbeLocation& loc,
                                  const Volume& volume);

Measurement diffract(const ComplexField& wave);

struct NoiseSpec {
  bool enabled = false;
  double dose = 1.0e6;  // expected counts per probe
  std::uint64_t seed = 0;
};

/// One measurement per scan location, each with Poisson counting noise
/// at `noise.dose` when enabled.
std::vector<Measurement> simulate_measurements(const Volume& volume,
                                               const ScanPattern& scan,
                                               const Probe& probe,
                                               const NoiseSpec& noise = {});

}  // namespace ptychotile
