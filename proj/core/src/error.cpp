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

#include "vdistill/error.hpp"

namespace vdistill {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kData: return "data";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kNumerical: return "numerical";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 3;
    case ErrorKind::kIo: return 4;
    case ErrorKind::kFormat: return 5;
    case ErrorKind::kDimension: return 6;
    case ErrorKind::kData: return 7;
    case ErrorKind::kNumerical: return 8;
    case ErrorKind::kDegenerate: return 9;
    case ErrorKind::kContract: return 10;
  }
  return 1;
}

}  // namespace vdistill
