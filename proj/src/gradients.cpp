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
#include "ptychotile/gradients.hpp"

#include <cmath>
#include <limits>

#include "ptychotile/error.hpp"
#include "ptychotile/fft.hpp"

namespace ptychotile {

StepSize::StepSize(double alpha) : alpha_(alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("step size must be finite and non-negative");
  }
}

namespace {

void check_measurement(const Measurement& y, const Probe& probe) {
  const int n = probe.params.grid_size;
  if (y.magnitude.rows() != n || y.magnitude.cols() != n) {
    throw ShapeMismatch("measurement does not match the probe grid");
  }
}

double residual_loss(const Measurement& y, const ComplexField& detector) {
  double f = 0.0;
  for (std::size_t i = 0; i < detector.size(); ++i) {
    const double d = y.magnitude.data()[i] - std::abs(detector.data()[i]);
    f += d * d;
  }
  return f;
}

}  // namespace

double loss(const Measurement& y, const Probe& probe, const ProbeLocation& loc,
            const Volume& volume) {
  check_measurement(y, probe);
  return residual_loss(y, multislice_forward(probe, loc, volume).detector);
}

LossAndGrad loss_and_grad(const Measurement& y, const Probe& probe,
                          const ProbeLocation& loc, const Volume& volume) {
  check_measurement(y, probe);
  ForwardTrace trace = multislice_forward(probe, loc, volume);
  LossAndGrad out;
  out.loss = residual_loss(y, trace.detector);

  const int slices = volume.slices();
  const Rect region = trace.window.intersect(volume.data.region());
  out.grad = GradField(slices, region);

  // Detector seed dF/d(conj Psi) = (|Psi| - |y|) Psi / |Psi|; zero where
  // |Psi| vanishes.
  ComplexField chi = std::move(trace.detector);
  for (std::size_t i = 0; i < chi.size(); ++i) {
    const Complex psi = chi.data()[i];
    const double mag = std::abs(psi);
    chi.data()[i] = (mag > 0.0)
                        ? (mag - y.magnitude.data()[i]) * (psi / mag)
                        : Complex(0.0, 0.0);
  }
  fft::inverse(chi);

  const double sigma = probe.params.interaction_constant;
  const double propagator = probe.params.propagator;
  const Rect& w = trace.window;
  for (int s = slices - 1; s >= 0; --s) {
    free_space_propagate(chi, -propagator);
    const ComplexField& t = trace.transmission[static_cast<std::size_t>(s)];
    const ComplexField& psi = trace.incident[static_cast<std::size_t>(s)];
    for (int yy = region.y0; yy < region.y1; ++yy) {
      for (int xx = region.x0; xx < region.x1; ++xx) {
        const int wy = yy - w.y0;
        const int wx = xx - w.x0;
        const Complex transmitted = t(wy, wx) * psi(wy, wx);
        out.grad.at(s, yy, xx) =
            2.0 * sigma * std::imag(chi(wy, wx) * std::conj(transmitted));
      }
    }
    for (std::size_t i = 0; i < chi.size(); ++i) {
      chi.data()[i] *= std::conj(t.data()[i]);
    }
  }
  return out;
}

GradField grad(const Measurement& y, const Probe& probe,
               const ProbeLocation& loc, const Volume& volume) {
  return loss_and_grad(y, probe, loc, volume).grad;
}

GradField fd_gradient(const std::function<double(const Volume&)>& f,
                      const Volume& volume, const Rect& region,
                      double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  const Rect r = region.intersect(volume.data.region());
  GradField g(volume.slices(), r);
  Volume probe_volume = volume;
  for (int s = 0; s < volume.slices(); ++s) {
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        double& v = probe_volume.data.at(s, y, x);
        const double original = v;
        v = original + epsilon;
        const double up = f(probe_volume);
        v = original - epsilon;
        const double down = f(probe_volume);
        v = original;
        g.at(s, y, x) = (up - down) / (2.0 * epsilon);
      }
    }
  }
  return g;
}

GradField grad_fd_oracle(const Measurement& y, const Probe& probe,
                         const ProbeLocation& loc, const Volume& volume,
                         double epsilon) {
  const Rect window = probe_window(loc, probe.params.grid_size);
  return fd_gradient(
      [&](const Volume& v) { return loss(y, probe, loc, v); }, volume, window,
      epsilon);
}

GradField mask_to_circle(GradField g, const ProbeLocation& loc, int radius) {
  const Rect& r = g.region();
  for (int s = 0; s < g.slices(); ++s) {
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        if (!in_circle(loc, radius, y, x)) g.at(s, y, x) = 0.0;
      }
    }
  }
  return g;
}

void apply_step(RegionArray& target, const GradField& g, StepSize alpha) {
  if (g.slices() != target.slices() || !target.region().contains(g.region())) {
    throw ShapeMismatch("gradient is not congruent with the target region");
  }
  const double a = alpha.value();
  if (a == 0.0) return;
  const Rect& r = g.region();
  for (int s = 0; s < g.slices(); ++s) {
    for (int y = r.y0; y < r.y1; ++y) {
      const double* in = &g.values()[g.offset(s, y, r.x0)];
      double* out = &target.at(s, y, r.x0);
      for (int i = 0; i < r.width(); ++i) out[i] -= a * in[i];
    }
  }
}

double relative_l2(const RegionArray& a, const RegionArray& b) {
  if (a.slices() != b.slices() || !(a.region() == b.region())) {
    throw ShapeMismatch("relative_l2 needs congruent arrays");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    num += d * d;
    den += b.values()[i] * b.values()[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

}  // namespace ptychotile
