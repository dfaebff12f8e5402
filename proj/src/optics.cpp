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
#include "ptychotile/optics.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ptychotile/error.hpp"
#include "ptychotile/fft.hpp"

namespace ptychotile {
namespace {

double aperture_weight(double k, double radius, double rolloff) {
  if (k <= radius) return 1.0;
  const double edge = radius * rolloff;
  if (edge <= 0.0 || k >= radius + edge) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * (k - radius) / edge);
  return c * c;
}

void apply_quadratic_phase(ComplexField& spectrum, double coefficient) {
  const int n_y = spectrum.rows();
  const int n_x = spectrum.cols();
  for (int y = 0; y < n_y; ++y) {
    const double fy = fft::frequency(y, n_y);
    for (int x = 0; x < n_x; ++x) {
      const double fx = fft::frequency(x, n_x);
      const double phase = -coefficient * (fy * fy + fx * fx);
      spectrum(y, x) *= Complex(std::cos(phase), std::sin(phase));
    }
  }
}

}  // namespace

Probe make_probe(const ProbeParams& params) {
  const int n = params.grid_size;
  if (n <= 0) throw ConfigError("probe grid size must be positive");
  if (!(params.aperture_semiangle > 0.0)) {
    throw ConfigError("aperture semiangle must be positive");
  }
  ComplexField spectrum(n, n);
  for (int y = 0; y < n; ++y) {
    const double fy = fft::frequency(y, n);
    for (int x = 0; x < n; ++x) {
      const double fx = fft::frequency(x, n);
      const double k2 = fy * fy + fx * fx;
      const double a = aperture_weight(std::sqrt(k2), params.aperture_semiangle,
                                       params.aperture_rolloff);
      const double phase = -params.defocus * k2;
      spectrum(y, x) = a * Complex(std::cos(phase), std::sin(phase));
    }
  }
  fft::inverse(spectrum);

  // Move the origin to the window centre.
  Probe probe{ComplexField(n, n), params};
  const int h = n / 2;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      probe.field((y + h) % n, (x + h) % n) = spectrum(y, x);
    }
  }
  double energy = 0.0;
  for (const auto& v : probe.field.values()) energy += std::norm(v);
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& v : probe.field.values()) v *= scale;
  return probe;
}

Rect probe_window(const ProbeLocation& loc, int grid_size) {
  const int h = grid_size / 2;
  return {loc.center_y - h, loc.center_x - h, loc.center_y - h + grid_size,
          loc.center_x - h + grid_size};
}

void free_space_propagate(ComplexField& field, double coefficient) {
  if (coefficient == 0.0) return;
  fft::forward(field);
  apply_quadratic_phase(field, coefficient);
  fft::inverse(field);
}

ForwardTrace multislice_forward(const Probe& probe, const ProbeLocation& loc,
                                const Volume& volume) {
  const int n = probe.params.grid_size;
  ForwardTrace trace;
  trace.window = probe_window(loc, n);
  if (!Rect::of(volume.extent).contains(trace.window)) {
    std::ostringstream os;
    os << "probe " << loc.index << " window " << trace.window
       << " leaves the volume";
    throw WindowOutOfBounds(os.str());
  }
  const RegionArray& v = volume.data;
  const Rect stored = trace.window.intersect(v.region());
  const double sigma = probe.params.interaction_constant;
  const int slices = v.slices();
  trace.incident.reserve(static_cast<std::size_t>(slices));
  trace.transmission.reserve(static_cast<std::size_t>(slices));

  ComplexField psi = probe.field;
  for (int s = 0; s < slices; ++s) {
    ComplexField t(n, n, Complex(1.0, 0.0));
    for (int y = stored.y0; y < stored.y1; ++y) {
      for (int x = stored.x0; x < stored.x1; ++x) {
        const double phase = sigma * v.at(s, y, x);
        t(y - trace.window.y0, x - trace.window.x0) =
            Complex(std::cos(phase), std::sin(phase));
      }
    }
    trace.incident.push_back(psi);
    for (std::size_t i = 0; i < psi.size(); ++i) {
      psi.data()[i] *= t.data()[i];
    }
    trace.transmission.push_back(std::move(t));
    free_space_propagate(psi, probe.params.propagator);
  }
  trace.exit_wave = psi;
  trace.detector = std::move(psi);
  fft::forward(trace.detector);
  return trace;
}

ComplexField multislice_propagate(const Probe& probe, const ProbeLocation& loc,
                                  const Volume& volume) {
  return multislice_forward(probe, loc, volume).exit_wave;
}

Measurement diffract(const ComplexField& wave) {
  ComplexField spectrum = wave;
  fft::forward(spectrum);
  Measurement m{Array2<double>(wave.rows(), wave.cols()), 0};
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    m.magnitude.data()[i] = std::abs(spectrum.data()[i]);
  }
  return m;
}

std::vector<Measurement> simulate_measurements(const Volume& volume,
                                               const ScanPattern& scan,
                                               const Probe& probe,
                                               const NoiseSpec& noise) {
  std::vector<Measurement> out;
  out.reserve(scan.size());
  std::mt19937_64 rng(noise.seed);
  for (const auto& loc : scan.locations) {
    const ForwardTrace trace = multislice_forward(probe, loc, volume);
    Measurement m{Array2<double>(trace.detector.rows(), trace.detector.cols()),
                  loc.index};
    for (std::size_t i = 0; i < m.magnitude.size(); ++i) {
      const Complex amp = trace.detector.data()[i];
      if (noise.enabled) {
        const double intensity = std::norm(amp);
        const double mean = intensity * noise.dose;
        double counts = 0.0;
        if (mean > 0.0) {
          std::poisson_distribution<long long> draw(mean);
          counts = static_cast<double>(draw(rng));
        }
        m.magnitude.data()[i] = std::sqrt(counts / noise.dose);
      } else {
        m.magnitude.data()[i] = std::abs(amp);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace ptychotile
