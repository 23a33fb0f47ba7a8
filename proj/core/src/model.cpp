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

#include "segstream/model.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "segstream/tensor_io.hpp"

namespace segstream {

namespace {

constexpr char kCkptMagic[4] = {'S', 'G', 'C', 'K'};
constexpr uint32_t kCkptVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error(std::string("load_checkpoint: truncated ") + what);
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

std::string config_to_text(const ModelConfig& c) {
  std::ostringstream os;
  os << "input_dim=" << c.input_dim << "\n"
     << "encoder_layers=" << c.encoder_layers << "\n"
     << "encoder_units=" << c.encoder_units << "\n"
     << "prediction_layers=" << c.prediction_layers << "\n"
     << "prediction_units=" << c.prediction_units << "\n"
     << "joint_units=" << c.joint_units << "\n"
     << "vocab_size=" << c.vocab_size << "\n";
  return os.str();
}

ModelConfig config_from_text(const std::string& text) {
  std::map<std::string, int> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("load_checkpoint: malformed config line '" + line + "'");
    }
    kv[line.substr(0, eq)] = std::stoi(line.substr(eq + 1));
  }
  ModelConfig c;
  auto take = [&](const char* key, int& field) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::runtime_error(std::string("load_checkpoint: config missing field ") + key);
    }
    field = it->second;
    kv.erase(it);
  };
  take("input_dim", c.input_dim);
  take("encoder_layers", c.encoder_layers);
  take("encoder_units", c.encoder_units);
  take("prediction_layers", c.prediction_layers);
  take("prediction_units", c.prediction_units);
  take("joint_units", c.joint_units);
  take("vocab_size", c.vocab_size);
  if (!kv.empty()) {
    throw std::runtime_error("load_checkpoint: unknown config field " + kv.begin()->first);
  }
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const ModelParams<float>& params, int64_t step,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kCkptMagic, 4);
  write_u32(out, kCkptVersion);
  write_u32(out, static_cast<uint32_t>(step & 0xffffffff));
  write_u32(out, static_cast<uint32_t>(static_cast<uint64_t>(step) >> 32));

  const std::string cfg = config_to_text(params.config);
  write_u32(out, static_cast<uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  uint32_t count = 0;
  params.for_each_tensor([&](const std::string&, const auto&) { ++count; });
  write_u32(out, count);
  params.for_each_tensor([&](const std::string& name, const auto& tensor) {
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    MatrixF as_matrix(tensor.rows(), tensor.cols());
    for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
      for (Eigen::Index j = 0; j < tensor.cols(); ++j) as_matrix(i, j) = tensor(i, j);
    }
    write_sgt(out, as_matrix);
  });
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string() +
                             ", expected SGCK");
  }
  const uint32_t version = read_u32(in, "version");
  if (version != kCkptVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  }
  const uint32_t step_lo = read_u32(in, "step");
  const uint32_t step_hi = read_u32(in, "step");

  const uint32_t cfg_len = read_u32(in, "config length");
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), cfg_len)) {
    throw std::runtime_error("load_checkpoint: truncated config block");
  }

  Checkpoint ckpt;
  ckpt.step = static_cast<int64_t>((static_cast<uint64_t>(step_hi) << 32) | step_lo);
  ckpt.params = ModelParams<float>::zeros(config_from_text(cfg_text));

  const uint32_t count = read_u32(in, "tensor count");
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(in, "tensor name");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw std::runtime_error("load_checkpoint: truncated tensor name");
    }
    MatrixF m = read_sgt(in, path.string() + ":" + name);
    bool placed = false;
    ckpt.params.for_each_tensor([&](const std::string& tname, auto& tensor) {
      if (tname != name) return;
      if (tensor.rows() != m.rows() || tensor.cols() != m.cols()) {
        throw std::runtime_error("load_checkpoint: tensor " + name + " has shape " +
                                 std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                 ", config implies " + std::to_string(tensor.rows()) + "x" +
                                 std::to_string(tensor.cols()));
      }
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) tensor(r, c) = m(r, c);
      }
      placed = true;
    });
    if (!placed) {
      throw std::runtime_error("load_checkpoint: unexpected tensor name " + name);
    }
  }
  return ckpt;
}

}  // namespace segstream
