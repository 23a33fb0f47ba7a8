// Copyright 2026 The segstream Authors
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
// The "SGT1" tensor container: 4 magic bytes, rows and cols as 32-bit
// little-endian unsigned integers, then row-major 32-bit little-endian
// floats. Round-trips are bit-exact.

#pragma once

#include <filesystem>
#include <iosfwd>

#include "segstream/matrix.hpp"

namespace segstream {

void write_sgt(std::ostream& out, const MatrixF& m);
MatrixF read_sgt(std::istream& in, const std::string& context);

void write_sgt_file(const std::filesystem::path& path, const MatrixF& m);
MatrixF read_sgt_file(const std::filesystem::path& path);

}  // namespace segstream
