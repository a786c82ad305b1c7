// Copyright 2026 The cmil Authors
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

namespace cmil {

/// Invalid configuration or violated precondition (CLI exit code 1).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Filesystem failure: missing path, unwritable directory (CLI exit code 2).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file content. The message names the record and byte offset.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-fatal diagnostic to stderr.
void warn(const std::string& message);

}  // namespace cmil
