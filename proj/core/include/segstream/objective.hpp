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
// The two training objectives. Segmented: the encoder sees each transcribed
// segment in isolation from a fresh zero state and the per-segment losses are
// summed. Full-utterance: the encoder runs once over every frame, encodings
// are sliced per transcribed segment, and gradients flow back through the
// whole input sequence. The prediction network starts from a fresh zero state
// per segment in both modes; only the encoder's context differs.

#pragma once

#include <chrono>
#include <stdexcept>
#include <vector>

#include "segstream/dataset.hpp"
#include "segstream/model.hpp"
#include "segstream/rnnt_loss.hpp"

namespace segstream {

enum class TrainMode { segmented, full_utterance };

inline const char* train_mode_name(TrainMode mode) {
  return mode == TrainMode::segmented ? "segmented" : "full_utterance";
}

struct LossOptions {
  bool want_param_grads = true;
  bool want_input_grad = false;
  int only_segment = -1;  // restrict the loss to one segment (by index); -1 = all labeled
};

template <typename T>
struct UtteranceLossResult {
  double loss = 0.0;  // sum of per-segment losses
  int n_segments = 0;
  ModelParams<T> grads;
  Matrix<T> d_input;  // T x D; zero rows wherever no gradient reaches
  int64_t forward_ns = 0;
  int64_t backward_ns = 0;
};

namespace detail {

inline std::vector<int> loss_segment_indices(const std::vector<SegmentRecord>& segments,
                                             int n_frames, const LossOptions& opts) {
  std::vector<int> picked;
  if (opts.only_segment >= 0) {
    if (opts.only_segment >= static_cast<int>(segments.size())) {
      throw std::invalid_argument("utterance_loss: segment index " +
                                  std::to_string(opts.only_segment) + " out of range");
    }
    if (!segments[opts.only_segment].transcribed()) {
      throw std::invalid_argument("utterance_loss: segment " +
                                  std::to_string(opts.only_segment) + " is untranscribed");
    }
    picked.push_back(opts.only_segment);
  } else {
    for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
      if (segments[i].transcribed()) picked.push_back(i);
    }
    if (picked.empty()) {
      throw std::invalid_argument("utterance_loss: utterance has no transcribed segment");
    }
  }
  for (int i : picked) {
    const auto& s = segments[i];
    if (s.t_start < 0 || s.t_end < s.t_start || s.t_end >= n_frames) {
      throw std::invalid_argument("utterance_loss: segment [" + std::to_string(s.t_start) +
                                  ", " + std::to_string(s.t_end) + "] out of range for T=" +
                                  std::to_string(n_frames));
    }
  }
  return picked;
}

}  // namespace detail

template <typename T>
UtteranceLossResult<T> utterance_loss(const ModelParams<T>& params, const Matrix<T>& features,
                                      const std::vector<SegmentRecord>& segments, TrainMode mode,
                                      const LossOptions& opts = {}) {
  using clock = std::chrono::steady_clock;
  const int n_frames = static_cast<int>(features.rows());
  const std::vector<int> picked = detail::loss_segment_indices(segments, n_frames, opts);
  const bool want_backward = opts.want_param_grads || opts.want_input_grad;

  UtteranceLossResult<T> res;
  res.n_segments = static_cast<int>(picked.size());
  if (want_backward) res.grads = ModelParams<T>::zeros(params.config);
  if (opts.want_input_grad) {
    res.d_input = Matrix<T>::Zero(n_frames, static_cast<int>(features.cols()));
  }

  // One segment's pipeline from a given encoding slice. Timing: forward is
  // encoder/prediction/joint evaluation; the loss lattice and every gradient
  // pass count as backward.
  auto run_segment = [&](const SegmentRecord& seg, const Matrix<T>& h_slice,
                         Matrix<T>* d_h_slice) {
    const std::vector<int>& labels = *seg.labels;
    auto t0 = clock::now();
    PredictionForward<T> pred = predict_labels(params, labels);
    JointForward<T> jnt = joint(params, h_slice, pred.outputs());
    auto t1 = clock::now();
    res.forward_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();

    if (!want_backward) {
      res.loss += static_cast<double>(rnnt_lattice<T>(jnt.logits, labels).log_like) * -1.0;
      return;
    }
    LossResult<T> loss = rnnt_loss<T>(jnt.logits, labels);
    res.loss += static_cast<double>(loss.loss);
    JointBackward<T> back = joint_backward(params, h_slice, pred.outputs(), jnt, loss.dlogits,
                                           res.grads);
    prediction_backward(params, pred, labels, back.d_g, res.grads);
    *d_h_slice = std::move(back.d_h);
    auto t2 = clock::now();
    res.backward_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t2 - t1).count();
  };

  if (mode == TrainMode::full_utterance) {
    auto t0 = clock::now();
    EncoderForward<T> enc = encode(params, features);
    auto t1 = clock::now();
    res.forward_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();

    Matrix<T> d_h = Matrix<T>::Zero(n_frames, params.config.encoder_units);
    for (int i : picked) {
      const auto& seg = segments[i];
      Matrix<T> h_slice = enc.outputs().middleRows(seg.t_start, seg.n_frames());
      Matrix<T> d_h_slice;
      run_segment(seg, h_slice, &d_h_slice);
      if (want_backward) d_h.middleRows(seg.t_start, seg.n_frames()) += d_h_slice;
    }
    if (want_backward) {
      auto t2 = clock::now();
      Matrix<T> dx = encoder_backward(params, features, enc, std::move(d_h), res.grads,
                                      opts.want_input_grad);
      if (opts.want_input_grad) res.d_input = std::move(dx);
      auto t3 = clock::now();
      res.backward_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t3 - t2).count();
    }
  } else {
    for (int i : picked) {
      const auto& seg = segments[i];
      Matrix<T> seg_features = features.middleRows(seg.t_start, seg.n_frames());
      auto t0 = clock::now();
      EncoderForward<T> enc = encode(params, seg_features);
      auto t1 = clock::now();
      res.forward_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();

      Matrix<T> d_h_slice;
      run_segment(seg, enc.outputs(), &d_h_slice);
      if (want_backward) {
        auto t2 = clock::now();
        Matrix<T> dx = encoder_backward(params, seg_features, enc, std::move(d_h_slice),
                                        res.grads, opts.want_input_grad);
        if (opts.want_input_grad) {
          res.d_input.middleRows(seg.t_start, seg.n_frames()) += dx;
        }
        auto t3 = clock::now();
        res.backward_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t3 - t2).count();
      }
    }
  }
  return res;
}

}  // namespace segstream
