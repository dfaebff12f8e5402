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

#include "ptychotile/array.hpp"

namespace ptychotile::fft {

/// In-place unitary 2D DFT (scaled by 1/sqrt(rows*cols)). Safe to call
/// from several threads at once.
void forward(ComplexField& field);
/// In-place unitary inverse 2D DFT.
void inverse(ComplexField& field);

/// Signed frequency of DFT bin `i` of an `n`-point transform, in cycles
/// per sample.
inline double frequency(int i, int n) {
  return static_cast<double>(i < (n + 1) / 2 ? i : i - n) / n;
}

}  // namespace ptychotile::fft
