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

#include "segstream/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace segstream {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'T', '1'};

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const std::string& context) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error(context + ": truncated tensor header");
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

static_assert(std::endian::native == std::endian::little,
              "float payload I/O assumes a little-endian host");

}  // namespace

void write_sgt(std::ostream& out, const MatrixF& m) {
  out.write(kMagic, 4);
  write_u32(out, static_cast<uint32_t>(m.rows()));
  write_u32(out, static_cast<uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float)) * m.size());
  if (!out) throw std::runtime_error("write_sgt: write failed");
}

MatrixF read_sgt(std::istream& in, const std::string& context) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(context + ": bad tensor magic, expected SGT1");
  }
  const uint32_t rows = read_u32(in, context);
  const uint32_t cols = read_u32(in, context);
  if (rows == 0 || cols == 0) {
    throw std::runtime_error(context + ": zero-sized tensor");
  }
  MatrixF m(rows, cols);
  if (!in.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(sizeof(float)) * m.size())) {
    throw std::runtime_error(context + ": truncated tensor payload");
  }
  return m;
}

void write_sgt_file(const std::filesystem::path& path, const MatrixF& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_sgt_file: cannot open " + path.string());
  write_sgt(out, m);
}

MatrixF read_sgt_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_sgt_file: cannot open " + path.string());
  return read_sgt(in, path.string());
}

}  // namespace segstream
