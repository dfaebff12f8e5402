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

#include <stdexcept>
#include <string>

namespace ptychotile {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PTYCHOTILE_DEFINE_ERROR(Name)             \
  class Name : public Error {                     \
   public:                                        \
    explicit Name(const std::string& what)        \
        : Error(std::string(#Name ": ") + what) {} \
  }

// geometry
PTYCHOTILE_DEFINE_ERROR(OutOfBounds);
PTYCHOTILE_DEFINE_ERROR(HaloTooSmall);
// optics / gradients
PTYCHOTILE_DEFINE_ERROR(WindowOutOfBounds);
PTYCHOTILE_DEFINE_ERROR(ShapeMismatch);
// passes
PTYCHOTILE_DEFINE_ERROR(IncompleteCover);
// runtime
PTYCHOTILE_DEFINE_ERROR(CoverageError);
PTYCHOTILE_DEFINE_ERROR(ConfigError);
PTYCHOTILE_DEFINE_ERROR(DeadlockDetected);
PTYCHOTILE_DEFINE_ERROR(ContractViolation);
// baseline
PTYCHOTILE_DEFINE_ERROR(TileTooSmall);
// datastore
PTYCHOTILE_DEFINE_ERROR(BadMagic);
PTYCHOTILE_DEFINE_ERROR(VersionMismatch);
PTYCHOTILE_DEFINE_ERROR(TruncatedFile);
PTYCHOTILE_DEFINE_ERROR(IoError);

#undef PTYCHOTILE_DEFINE_ERROR

}  // namespace ptychotile
