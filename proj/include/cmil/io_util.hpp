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

#include <functional>
#include <ostream>
#include <string>

namespace cmil {

/// Writes through a temp file in the same directory, then renames onto the
/// target, so readers never observe partial content.
void atomic_write_file(const std::string& path,
                       const std::function<void(std::ostream&)>& writer);

void atomic_write_text(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace cmil
