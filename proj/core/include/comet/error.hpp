// Copyright 2026 The COMET Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace comet {

enum class ErrorKind {
  kShape,
  kConfig,
  kData,
  kNumeric,
  kFormat,
  kVersion,
  kOrdering,
  kUndefinedMetric,
  kDegenerateModel,
  kContract,
};

/// Base of every error the library throws. `kind()` lets callers (the CLI
/// in particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define COMET_DEFINE_ERROR(Name, Kind)                                    \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

COMET_DEFINE_ERROR(ShapeError, kShape)
COMET_DEFINE_ERROR(ConfigError, kConfig)
COMET_DEFINE_ERROR(DataError, kData)
COMET_DEFINE_ERROR(NumericError, kNumeric)
COMET_DEFINE_ERROR(FormatError, kFormat)
COMET_DEFINE_ERROR(VersionError, kVersion)
COMET_DEFINE_ERROR(OrderingError, kOrdering)
COMET_DEFINE_ERROR(UndefinedMetricError, kUndefinedMetric)
COMET_DEFINE_ERROR(DegenerateModelError, kDegenerateModel)
COMET_DEFINE_ERROR(ContractError, kContract)

#undef COMET_DEFINE_ERROR

}  // namespace comet
