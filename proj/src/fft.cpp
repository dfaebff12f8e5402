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
#include "ptychotile/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <utility>

namespace ptychotile::fft {
namespace {

// fftw planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (shape, direction) and kept for the
// lifetime of the process.
class PlanCache {
 public:
  fftw_plan get(int rows, int cols, int sign) {
    std::lock_guard lock(mu_);
    const auto key = std::make_tuple(rows, cols, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    ComplexField scratch(rows, cols);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_dft_2d(rows, cols, buf, buf, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(ComplexField& field, int sign) {
  if (field.size() == 0) return;
  fftw_plan p = cache().get(field.rows(), field.cols(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(field.data());
  fftw_execute_dft(p, buf, buf);
  const double scale = 1.0 / std::sqrt(static_cast<double>(field.size()));
  for (auto& v : field.values()) v *= scale;
}

}  // namespace

void forward(ComplexField& field) { run(field, FFTW_FORWARD); }
void inverse(ComplexField& field) { run(field, FFTW_BACKWARD); }

}  // namespace ptychotile::fft
