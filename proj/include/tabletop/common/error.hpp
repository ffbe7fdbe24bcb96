// Copyright 2026 The Tabletop Grounding Authors. All Rights Reserved.
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

namespace tabletop {

/// Base of every error raised by the library. Each subclass names one
/// failure mode so callers can catch exactly what they can recover from.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TABLETOP_DEFINE_ERROR(Name)        \
  class Name : public Error {              \
   public:                                 \
    explicit Name(const std::string& what) \
        : Error(#Name ": " + what) {}      \
  }

// world
TABLETOP_DEFINE_ERROR(PlacementInfeasible);
TABLETOP_DEFINE_ERROR(GripperOccupied);
TABLETOP_DEFINE_ERROR(ObjectNotFound);
TABLETOP_DEFINE_ERROR(ObjectBuried);
TABLETOP_DEFINE_ERROR(NothingHeld);
TABLETOP_DEFINE_ERROR(OutOfBounds);
TABLETOP_DEFINE_ERROR(InvalidArgument);
TABLETOP_DEFINE_ERROR(SchemaError);

// language
TABLETOP_DEFINE_ERROR(NoDiscriminativeExpression);
TABLETOP_DEFINE_ERROR(NoRelationFound);
TABLETOP_DEFINE_ERROR(UnknownToken);

// learning
TABLETOP_DEFINE_ERROR(NonFiniteLoss);
TABLETOP_DEFINE_ERROR(DimensionMismatch);
TABLETOP_DEFINE_ERROR(DegenerateChannel);
TABLETOP_DEFINE_ERROR(NoMassAvailable);
TABLETOP_DEFINE_ERROR(CheckpointError);

// execution
TABLETOP_DEFINE_ERROR(RetryExhausted);

#undef TABLETOP_DEFINE_ERROR

}  // namespace tabletop
