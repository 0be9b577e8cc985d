// Copyright 2026 The hrtfdiff Authors.
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

#ifndef HRTFDIFF_HASHING_H_
#define HRTFDIFF_HASHING_H_

#include <string>
#include <string_view>
#include <vector>

namespace hrtfdiff {

// Lower-case hex SHA-256.
std::string Sha256Hex(std::string_view bytes);
std::string Sha256File(const std::string& path);

// Hash over the sorted relative paths and contents of every regular file
// below `dir` (recursively), skipping names listed in `ignore`.
std::string HashDirectory(const std::string& dir,
                          const std::vector<std::string>& ignore = {});

}  // namespace hrtfdiff

#endif  // HRTFDIFF_HASHING_H_
