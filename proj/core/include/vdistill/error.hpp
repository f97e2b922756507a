// Copyright 2026 The vdistill Authors.
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
#include <string_view>

namespace vdistill {

/// Category of a failure. Each kind maps to a distinct process exit code in
/// the command-line tool (see exit_code()).
enum class ErrorKind {
  kConfig,      // invalid configuration value or unknown key
  kContract,    // violated precondition of a library call
  kDimension,   // vector/matrix shape mismatch
  kFormat,      // malformed or unsupported file contents
  kData,        // well-formed input that is semantically inconsistent
  kIo,          // file missing or unwritable
  kDegenerate,  // zero-norm embedding where a direction is required
  kNumerical,   // non-finite value produced during optimization
};

std::string_view to_string(ErrorKind kind);

/// Exit status used by the CLI for each error kind.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace vdistill
