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
// Per-input-frame L2 norms of the gradient of one segment's transducer loss,
// backpropagated through the encoder over the whole utterance. Frames after
// the segment end carry exactly zero gradient (causality); frames before the
// segment show how much untranscribed context contributes.

#pragma once

#include <filesystem>
#include <vector>

#include "segstream/objective.hpp"

namespace segstream {

struct SaliencyTrace {
  std::vector<double> grad_norm;  // g_t = ||dL/dx_t||_2, length T
  std::vector<double> energy;     // mean |x_t| per frame, for co-plotting
  int t_start = 0;                // target segment span
  int t_end = 0;
};

template <typename T>
SaliencyTrace saliency_trace(const ModelParams<T>& params, const UtteranceRecord& record,
                             int segment_index, TrainMode mode = TrainMode::full_utterance) {
  if (segment_index < 0 || segment_index >= static_cast<int>(record.segments.size())) {
    throw std::invalid_argument("saliency_trace: segment index out of range");
  }
  const auto& seg = record.segments[segment_index];
  if (!seg.transcribed()) {
    throw std::invalid_argument("saliency_trace: segment " + std::to_string(segment_index) +
                                " of '" + record.id + "' is untranscribed");
  }
  Matrix<T> features = record.features.template cast<T>();
  LossOptions opts;
  opts.want_param_grads = false;
  opts.want_input_grad = true;
  opts.only_segment = segment_index;
  auto res = utterance_loss<T>(params, features, record.segments, mode, opts);

  SaliencyTrace trace;
  trace.t_start = seg.t_start;
  trace.t_end = seg.t_end;
  const int n_frames = record.n_frames();
  trace.grad_norm.resize(n_frames);
  trace.energy.resize(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    trace.grad_norm[t] = static_cast<double>(res.d_input.row(t).norm());
    trace.energy[t] = static_cast<double>(features.row(t).cwiseAbs().mean());
  }
  return trace;
}

// Tab-separated text, one row per frame: index, time at 30 ms/frame, g_t,
// energy, in-segment flag. Parses back with any plotting tool.
void export_trace(const SaliencyTrace& trace, const std::filesystem::path& path);
SaliencyTrace import_trace(const std::filesystem::path& path);

}  // namespace segstream
