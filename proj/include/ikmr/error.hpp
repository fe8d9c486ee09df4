// Copyright 2026 The IKMR Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace ikmr {

/// Base class for all errors raised by the library. Validation problems
/// (bad files, shape mismatches, broken invariants) derive from this; the
/// CLI maps them to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define IKMR_DEFINE_ERROR(NAME)                                   \
  class NAME : public Error {                                     \
   public:                                                        \
    explicit NAME(const std::string& msg) : Error(msg) {}         \
  }

IKMR_DEFINE_ERROR(ZeroQuaternionError);
IKMR_DEFINE_ERROR(InvalidSkeletonError);
IKMR_DEFINE_ERROR(InvalidClipError);
IKMR_DEFINE_ERROR(SkeletonMismatchError);
IKMR_DEFINE_ERROR(EmptyEndEffectorSetError);
IKMR_DEFINE_ERROR(ShapeMismatchError);
IKMR_DEFINE_ERROR(InvalidKernelError);
IKMR_DEFINE_ERROR(NotScalarError);
IKMR_DEFINE_ERROR(AdjacencyMismatchError);
IKMR_DEFINE_ERROR(IncompleteMapError);
IKMR_DEFINE_ERROR(WindowLengthMismatchError);
IKMR_DEFINE_ERROR(EmptyDatasetError);
IKMR_DEFINE_ERROR(LengthMismatchError);
IKMR_DEFINE_ERROR(TopologyMismatchError);
IKMR_DEFINE_ERROR(LimitsMismatchError);
IKMR_DEFINE_ERROR(InvalidGammaError);
IKMR_DEFINE_ERROR(NonPositiveSigmaError);
IKMR_DEFINE_ERROR(TooShortError);
IKMR_DEFINE_ERROR(ZeroVarianceError);
IKMR_DEFINE_ERROR(FormatError);
IKMR_DEFINE_ERROR(ConfigError);

#undef IKMR_DEFINE_ERROR

}  // namespace ikmr
