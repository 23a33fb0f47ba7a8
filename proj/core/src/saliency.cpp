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

#include "segstream/saliency.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace segstream {

namespace {
constexpr double kFrameSeconds = 0.030;
}

void export_trace(const SaliencyTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_trace: cannot open " + path.string());
  out << "frame\ttime_s\tgrad_norm\tenergy\tin_segment\n";
  out << std::setprecision(9);
  for (size_t t = 0; t < trace.grad_norm.size(); ++t) {
    const bool inside =
        static_cast<int>(t) >= trace.t_start && static_cast<int>(t) <= trace.t_end;
    out << t << '\t' << static_cast<double>(t) * kFrameSeconds << '\t' << trace.grad_norm[t]
        << '\t' << trace.energy[t] << '\t' << (inside ? 1 : 0) << "\n";
  }
  if (!out) throw std::runtime_error("export_trace: write failed for " + path.string());
}

SaliencyTrace import_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("import_trace: cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header) || header.rfind("frame\t", 0) != 0) {
    throw std::runtime_error("import_trace: missing header in " + path.string());
  }
  SaliencyTrace trace;
  trace.t_start = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    long frame;
    double time_s, grad, energy;
    int inside;
    if (!(is >> frame >> time_s >> grad >> energy >> inside)) {
      throw std::runtime_error("import_trace: malformed row '" + line + "'");
    }
    trace.grad_norm.push_back(grad);
    trace.energy.push_back(energy);
    if (inside) {
      if (trace.t_start < 0) trace.t_start = static_cast<int>(frame);
      trace.t_end = static_cast<int>(frame);
    }
  }
  if (trace.t_start < 0) trace.t_start = trace.t_end = 0;
  return trace;
}

}  // namespace segstream
