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

/// \file gradients.hpp
/// Per-probe amplitude loss f_i = sum (|y_i| - |G(p_i, V)|)^2, its adjoint
/// gradient with respect to the real potential, and the finite-difference
/// oracle that checks it.

#include <functional>

#include "ptychotile/array.hpp"
#include "ptychotile/optics.hpp"

namespace ptychotile {

/// Gradient with respect to the voxels of `region()`; zero elsewhere.
using GradField = RegionArray;

/// Non-negative gradient-descent step length.
class StepSize {
 public:
  explicit StepSize(double alpha);
  double value() const { return alpha_; }

 private:
  double alpha_;
};

double loss(const Measurement& y, const Probe& probe, const ProbeLocation& loc,
            const Volume& volume);

struct LossAndGrad {
  double loss = 0.0;
  GradField grad;
};

/// Adjoint-mode gradient of the loss. The result covers the probe window
/// intersected with the stored part of `volume`.
LossAndGrad loss_and_grad(const Measurement& y, const Probe& probe,
                          const ProbeLocation& loc, const Volume& volume);

GradField grad(const Measurement& y, const Probe& probe,
               const ProbeLocation& loc, const Volume& volume);

/// Central differences of an arbitrary scalar function of the volume over
/// the voxels in `region`.
GradField fd_gradient(const std::function<double(const Volume&)>& f,
                      const Volume& volume, const Rect& region,
                      double epsilon);

/// Central-difference gradient of loss() over the probe window.
GradField grad_fd_oracle(const Measurement& y, const Probe& probe,
                         const ProbeLocation& loc, const Volume& volume,
                         double epsilon);

/// Zeroes, in every slice, the entries outside the probe's circle.
GradField mask_to_circle(GradField g, const ProbeLocation& loc, int radius);

/// target -= alpha * g. Throws ShapeMismatch unless g's region lies inside
/// the target region with the same slice count.
void apply_step(RegionArray& target, const GradField& g, StepSize alpha);

/// Relative L2 distance ||a - b|| / ||b|| (0 when both vanish).
double relative_l2(const RegionArray& a, const RegionArray& b);

}  // namespace ptychotile
