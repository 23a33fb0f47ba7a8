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

#include "segstream/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace segstream {

namespace {

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t rd_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}
void wr_u16(std::ofstream& out, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw std::runtime_error("read_wav: " + path.string() + " is not a RIFF/WAVE file");
  }

  Waveform w;
  bool got_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint32_t chunk_size = rd_u32(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    if (pos + 8 + chunk_size > bytes.size()) {
      throw std::runtime_error("read_wav: truncated chunk in " + path.string());
    }
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw std::runtime_error("read_wav: short fmt chunk");
      const uint16_t format = rd_u16(body);
      const uint16_t channels = rd_u16(body + 2);
      const uint16_t bits = rd_u16(body + 14);
      if (format != 1 || channels != 1 || bits != 16) {
        throw std::runtime_error("read_wav: " + path.string() +
                                 ": only 16-bit PCM mono is supported");
      }
      w.sample_rate = static_cast<int>(rd_u32(body + 4));
      got_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!got_fmt) throw std::runtime_error("read_wav: data chunk before fmt chunk");
      const size_t n = chunk_size / 2;
      w.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        const int16_t s = static_cast<int16_t>(body[2 * i] | (body[2 * i + 1] << 8));
        w.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      return w;
    }
    pos += 8 + chunk_size + (chunk_size & 1);
  }
  throw std::runtime_error("read_wav: no data chunk in " + path.string());
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path.string());
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  wr_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  wr_u32(out, 16);
  wr_u16(out, 1);  // PCM
  wr_u16(out, 1);  // mono
  wr_u32(out, static_cast<uint32_t>(w.sample_rate));
  wr_u32(out, static_cast<uint32_t>(w.sample_rate) * 2);
  wr_u16(out, 2);
  wr_u16(out, 16);
  out.write("data", 4);
  wr_u32(out, data_bytes);
  for (float sample : w.samples) {
    float clamped = std::max(-1.0f, std::min(sample, 32767.0f / 32768.0f));
    const int16_t s = static_cast<int16_t>(std::lround(clamped * 32768.0f));
    unsigned char b[2] = {static_cast<unsigned char>(s & 0xff),
                          static_cast<unsigned char>((s >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
  }
  if (!out) throw std::runtime_error("write_wav: write failed for " + path.string());
}

}  // namespace segstream
