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
// Segment-wise transducer inference: one encoder pass over the utterance,
// then greedy or beam decoding per segment slice with a fresh prediction
// state, plus edit-distance scoring and nWER/WERR reporting.

#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "segstream/dataset.hpp"
#include "segstream/model.hpp"
#include "segstream/objective.hpp"

namespace segstream {

inline constexpr int kMaxSymbolsPerFrame = 5;

template <typename T>
struct Hypothesis {
  std::vector<int> labels;  // never contains blank
  double log_score = 0.0;   // log P, merged over blank placements
  std::vector<LstmState<T>> pred_states;
  Vector<T> g;  // prediction output for the current label history
};

namespace detail {

template <typename T>
Vector<T> joint_logits_row(const ModelParams<T>& params, const Vector<T>& h_row,
                           const Vector<T>& g_row) {
  const auto& cfg = params.config;
  Vector<T> pre = params.joint_w.leftCols(cfg.encoder_units) * h_row +
                  params.joint_w.rightCols(cfg.prediction_units) * g_row + params.joint_b;
  return params.out_w * pre.array().tanh().matrix() + params.out_b;
}

template <typename T>
Vector<T> log_softmax_vec(Vector<T> z) {
  const T zmax = z.maxCoeff();
  const T log_z = zmax + std::log((z.array() - zmax).exp().sum());
  return z.array() - log_z;
}

// Score-descending order; ties broken toward lexicographically smaller label
// sequences so equal-scoring shorter/lower-id hypotheses win.
template <typename T>
bool hyp_better(const Hypothesis<T>& a, const Hypothesis<T>& b) {
  if (a.log_score != b.log_score) return a.log_score > b.log_score;
  return a.labels < b.labels;
}

}  // namespace detail

// Emit the argmax token until blank wins (ties go to the lowest token id,
// blank included), then advance; at most max_symbols expansions per frame.
template <typename T>
std::vector<int> greedy_decode(const ModelParams<T>& params, const Matrix<T>& h_slice,
                               int max_symbols = kMaxSymbolsPerFrame) {
  if (h_slice.rows() < 1) throw std::invalid_argument("greedy_decode: empty encoding slice");
  std::vector<int> out;
  std::vector<LstmState<T>> states;
  Vector<T> g = prediction_step(params, kBlankId, states);
  for (int t = 0; t < h_slice.rows(); ++t) {
    for (int expansions = 0; expansions < max_symbols; ++expansions) {
      Vector<T> z = detail::joint_logits_row<T>(params, h_slice.row(t).transpose(), g);
      int best = 0;
      z.maxCoeff(&best);  // first occurrence = lowest id on ties
      if (best == kBlankId) break;
      out.push_back(best);
      g = prediction_step(params, best, states);
    }
  }
  return out;
}

// Breadth-limited search over emission sequences. Hypotheses with identical
// label sequences are merged by log-sum wherever they meet, so with a beam
// wide enough to avoid pruning the top score equals log P(y | h) exactly.
template <typename T>
std::vector<Hypothesis<T>> beam_decode(const ModelParams<T>& params, const Matrix<T>& h_slice,
                                       int beam_width, int n_best = 1,
                                       int max_symbols = kMaxSymbolsPerFrame) {
  if (beam_width < 1) throw std::invalid_argument("beam_decode: beam_width must be >= 1");
  if (h_slice.rows() < 1) throw std::invalid_argument("beam_decode: empty encoding slice");

  if (beam_width == 1) {
    // Width one is the greedy walk by contract: commit to the per-step argmax
    // (ties to the lowest id, blank included) and score the single path.
    Hypothesis<T> hyp;
    hyp.g = prediction_step(params, kBlankId, hyp.pred_states);
    for (int t = 0; t < h_slice.rows(); ++t) {
      for (int expansions = 0;; ++expansions) {
        const Vector<T> lp = detail::log_softmax_vec<T>(
            detail::joint_logits_row<T>(params, h_slice.row(t).transpose(), hyp.g));
        int best = 0;
        lp.maxCoeff(&best);
        if (best == kBlankId || expansions >= max_symbols) {
          hyp.log_score += static_cast<double>(lp[kBlankId]);
          break;
        }
        hyp.log_score += static_cast<double>(lp[best]);
        hyp.labels.push_back(best);
        hyp.g = prediction_step(params, best, hyp.pred_states);
      }
    }
    return {std::move(hyp)};
  }

  auto merge_into = [](std::vector<Hypothesis<T>>& set, Hypothesis<T>&& hyp) {
    for (auto& existing : set) {
      if (existing.labels == hyp.labels) {
        existing.log_score = log_add_exp(existing.log_score, hyp.log_score);
        return;
      }
    }
    set.push_back(std::move(hyp));
  };
  auto prune = [&](std::vector<Hypothesis<T>>& set) {
    std::sort(set.begin(), set.end(), detail::hyp_better<T>);
    if (static_cast<int>(set.size()) > beam_width) set.resize(beam_width);
  };

  std::vector<Hypothesis<T>> frontier;  // hypotheses about to consume the next frame
  {
    Hypothesis<T> start;
    start.g = prediction_step(params, kBlankId, start.pred_states);
    frontier.push_back(std::move(start));
  }

  for (int t = 0; t < h_slice.rows(); ++t) {
    const Vector<T> h_row = h_slice.row(t).transpose();
    std::vector<Hypothesis<T>> active = std::move(frontier);
    frontier.clear();
    for (int round = 0; round <= max_symbols && !active.empty(); ++round) {
      std::vector<Hypothesis<T>> expanded;
      for (auto& hyp : active) {
        const Vector<T> lp =
            detail::log_softmax_vec<T>(detail::joint_logits_row<T>(params, h_row, hyp.g));
        // Blank: move on to the next frame with the same label history.
        Hypothesis<T> stay = hyp;
        stay.log_score += static_cast<double>(lp[kBlankId]);
        merge_into(frontier, std::move(stay));
        if (round == max_symbols) continue;
        for (int k = 1; k < params.config.vocab_size; ++k) {
          Hypothesis<T> next;
          next.labels = hyp.labels;
          next.labels.push_back(k);
          next.log_score = hyp.log_score + static_cast<double>(lp[k]);
          next.pred_states = hyp.pred_states;
          next.g = prediction_step(params, k, next.pred_states);
          expanded.push_back(std::move(next));
        }
      }
      prune(expanded);
      active = std::move(expanded);
    }
    prune(frontier);
  }

  // Hypotheses in the frontier emitted the terminal blank at the last frame.
  std::sort(frontier.begin(), frontier.end(), detail::hyp_better<T>);
  if (static_cast<int>(frontier.size()) > n_best) frontier.resize(n_best);
  return frontier;
}

struct SegmentDecode {
  std::string utt_id;
  int segment_index = 0;
  std::vector<int> labels;
  double log_score = 0.0;
};

// Segment-wise inference, matched to how the system was trained. In
// full-utterance mode the encoder runs once over every frame and each
// requested segment decodes from its encoding slice; in segmented mode the
// encoder starts from a fresh zero state on each segment's own frames (for a
// segment-trained system the two perturbation scopes therefore coincide).
// The prediction state is fresh per segment either way. Default targets:
// every transcribed segment.
template <typename T>
std::vector<SegmentDecode> decode_utterance(const ModelParams<T>& params,
                                            const UtteranceRecord& record, int beam_width,
                                            TrainMode mode = TrainMode::full_utterance,
                                            const std::vector<int>& segment_indices = {}) {
  std::vector<int> targets = segment_indices;
  if (targets.empty()) {
    for (int i = 0; i < static_cast<int>(record.segments.size()); ++i) {
      if (record.segments[i].transcribed()) targets.push_back(i);
    }
  }
  if (targets.empty()) {
    throw std::invalid_argument("decode_utterance: no segments designated for decoding");
  }
  for (int idx : targets) {
    if (idx < 0 || idx >= static_cast<int>(record.segments.size())) {
      throw std::invalid_argument("decode_utterance: segment index out of range");
    }
  }

  Matrix<T> features = record.features.template cast<T>();
  EncoderForward<T> enc;
  if (mode == TrainMode::full_utterance) enc = encode(params, features);

  std::vector<SegmentDecode> out;
  for (int idx : targets) {
    const auto& seg = record.segments[idx];
    Matrix<T> h_slice;
    if (mode == TrainMode::full_utterance) {
      h_slice = enc.outputs().middleRows(seg.t_start, seg.n_frames());
    } else {
      Matrix<T> seg_features = features.middleRows(seg.t_start, seg.n_frames());
      h_slice = encode(params, seg_features).outputs();
    }
    auto hyps = beam_decode(params, h_slice, beam_width, 1);
    SegmentDecode d;
    d.utt_id = record.id;
    d.segment_index = idx;
    if (!hyps.empty()) {
      d.labels = hyps.front().labels;
      d.log_score = hyps.front().log_score;
    }
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct EditCounts {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int total() const { return substitutions + insertions + deletions; }
};

// Levenshtein with unit costs. An empty reference scores |hyp| insertions.
EditCounts edit_distance(const std::vector<int>& ref, const std::vector<int>& hyp);

// Per-reference-token error flags from one optimal alignment (substituted or
// deleted reference positions are flagged).
std::vector<bool> align_errors(const std::vector<int>& ref, const std::vector<int>& hyp);

struct ConditionRow {
  std::string condition;
  int n_utterances = 0;
  int64_t n_ref_tokens = 0;
  double err_base = 0.0;
  double err_new = 0.0;
  double nwer_base = 0.0;
  double nwer_new = 0.0;
  double werr = 0.0;  // (err_base - err_new) / err_base
};

struct EvalReport {
  std::string unit = "tokens";
  double base_overall_error = 0.0;  // normalizer: baseline on the overall set
  ConditionRow overall;
  std::vector<ConditionRow> rows;  // one per condition tag present
};

std::vector<SegmentDecode> decode_corpus(const ModelParams<float>& params,
                                         const std::vector<UtteranceRecord>& records,
                                         int beam_width, TrainMode mode, int threads);

// Pooled token error rate of decode results against the records' transcripts.
double token_error_rate(const std::vector<UtteranceRecord>& records,
                        const std::vector<SegmentDecode>& results);

EvalReport compare_systems(const std::vector<UtteranceRecord>& records,
                           const std::vector<SegmentDecode>& base_results,
                           const std::vector<SegmentDecode>& new_results);

// Aligned human-readable table followed by machine-readable "row ..." lines.
void print_eval_report(std::ostream& out, const EvalReport& report);

}  // namespace segstream
