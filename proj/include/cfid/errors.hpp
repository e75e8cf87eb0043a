// Copyright (c) the CFID Project Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFID_ERRORS_HPP_
#define CFID_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfid {

// Process exit codes shared by the library error taxonomy and the CLI.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kIo = 2,
  kCompatibility = 3,
  kValidation = 4,
};

// Base of every error thrown by the library. Each subclass carries a stable
// class name that the CLI prints verbatim, so scripts can match on it.
class Error : public std::runtime_error {
 public:
  Error(std::string_view error_class, ExitCode code, const std::string& message);

  const std::string& error_class() const noexcept { return error_class_; }
  ExitCode exit_code() const noexcept { return code_; }

 private:
  std::string error_class_;
  ExitCode code_;
};

#define CFID_DECLARE_ERROR(Name, Code)                              \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message)                       \
        : Error(#Name, ExitCode::Code, message) {}                  \
  }

// I/O and model loading.
CFID_DECLARE_ERROR(IoError, kIo);
CFID_DECLARE_ERROR(DecodeError, kIo);
CFID_DECLARE_ERROR(EmptySetError, kIo);
CFID_DECLARE_ERROR(ModelIoError, kIo);
CFID_DECLARE_ERROR(FormatVersionError, kIo);
CFID_DECLARE_ERROR(ChecksumError, kIo);

// Two artifacts that cannot be combined.
CFID_DECLARE_ERROR(ExtractorMismatch, kCompatibility);
CFID_DECLARE_ERROR(RepresentationMismatch, kCompatibility);
CFID_DECLARE_ERROR(ShapeMismatch, kCompatibility);

// Bad arguments or data.
CFID_DECLARE_ERROR(InvalidArgument, kValidation);
CFID_DECLARE_ERROR(DimensionMismatch, kValidation);
CFID_DECLARE_ERROR(NonFiniteSample, kValidation);
CFID_DECLARE_ERROR(InsufficientSamples, kValidation);
CFID_DECLARE_ERROR(WrongLevelCount, kValidation);

CFID_DECLARE_ERROR(NumericalFailure, kFailure);

#undef CFID_DECLARE_ERROR

}  // namespace cfid

#endif  // CFID_ERRORS_HPP_
