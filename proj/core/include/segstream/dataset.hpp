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
// Utterance/segment records, the text manifest with SGT1 feature tensors,
// the synthetic context-cue task, and the evaluation perturbations.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segstream/matrix.hpp"
#include "segstream/wav.hpp"

namespace segstream {

// Frame span at the encoder frame rate, both ends inclusive. labels absent
// means untranscribed; an empty label list is a legal transcription.
struct SegmentRecord {
  int t_start = 0;
  int t_end = 0;
  std::optional<std::vector<int>> labels;

  bool transcribed() const { return labels.has_value(); }
  int n_frames() const { return t_end - t_start + 1; }
  bool operator==(const SegmentRecord&) const = default;
};

inline const std::vector<std::string> kConditionTags = {
    "clean", "background_speech", "speaker_change", "reverb_full", "reverb_segment"};

struct UtteranceRecord {
  std::string id;
  MatrixF features;  // T x D encoder-input features
  std::vector<SegmentRecord> segments;  // sorted by t_start, pairwise disjoint
  std::vector<std::string> conditions;  // subset of kConditionTags, sorted

  int n_frames() const { return static_cast<int>(features.rows()); }
  int n_labeled() const {
    int n = 0;
    for (const auto& s : segments) n += s.transcribed() ? 1 : 0;
    return n;
  }
  // Throws std::runtime_error naming the utterance if any invariant fails.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Manifest + tensor container
// ---------------------------------------------------------------------------

// One text line per utterance; feature matrices in SGT1 files referenced
// relative to the manifest. write_manifest places tensors under
// "<manifest stem>_feats/" next to the manifest file.
void write_manifest(const std::vector<UtteranceRecord>& records,
                    const std::filesystem::path& manifest_path);
std::vector<UtteranceRecord> read_manifest(const std::filesystem::path& manifest_path);

// ---------------------------------------------------------------------------
// Synthetic context-cue task
// ---------------------------------------------------------------------------

// Generates utterances made of an untranscribed prefix carrying one of
// cue_code_count orthogonal bias vectors, followed by one transcribed segment
// of symbol patterns. Ambiguous symbols map to a label that depends on the
// cue, so the transcribed frames alone cannot resolve them; the cue can.
struct ContextCueSpec {
  int prefix_len_min = 40;
  int prefix_len_max = 120;
  int cue_code_count = 2;      // K
  double cue_bias_magnitude = 1.0;
  int n_symbols = 8;
  double ambiguous_fraction = 0.5;
  double noise_std = 0.3;
  uint64_t rng_seed = 0;

  int symbol_frames = 5;       // frames per symbol occurrence
  int segment_syms_min = 4;
  int segment_syms_max = 12;

  // The cue occupies an initial span of the prefix (the "keyword"), followed
  // by cue-free gap frames until the transcribed segment. With probability
  // cue_full_prefix_fraction the span covers the whole prefix (cue adjacent
  // to the segment, which keeps the dependency easy to discover); otherwise
  // the length is drawn from [cue_frames_min, cue_frames_max] clamped to the
  // prefix, and short spans demand genuine long-range memory.
  // cue_frames_max <= 0 means "up to the whole prefix".
  int cue_frames_min = 15;
  int cue_frames_max = 0;
  double cue_full_prefix_fraction = 0.5;

  // Per-utterance random feature offset ("static channel"), resolvable from
  // the prefix. Required for the channel-mismatch experiments to be
  // learnable.
  double channel_jitter_std = 0.25;

  // Fractions of generated utterances tagged with the matching eval
  // condition. speaker_change embeds a second cue in the segment and maps
  // labels through it, so the prefix cue misleads.
  double speaker_change_fraction = 0.0;
  double background_fraction = 0.0;
  double background_level = 0.5;

  int feature_dim() const { return n_symbols + cue_code_count; }
  int vocab_size() const { return n_symbols + 2; }  // blank + labels 1..n_symbols + spare
  int num_ambiguous() const;

  void validate() const;
};

// Label for `symbol` under cue code `cue`; the mapping is a per-cue bijection
// on the ambiguous symbol set and cue-independent elsewhere.
int context_cue_label(const ContextCueSpec& spec, int symbol, int cue);

// The per-symbol feature patterns (rows = symbols): the canonical basis of
// the symbol subspace.
MatrixF symbol_patterns(const ContextCueSpec& spec);

std::vector<UtteranceRecord> generate_context_task(const ContextCueSpec& spec, int n_utterances);

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

struct ImpulseResponse {
  std::vector<float> taps;
  int sample_rate = 16000;
};

enum class PerturbScope { full_utterance, segments_only };

// Convolves with the impulse response (full signal, or only labeled-segment
// sample spans with the tail truncated at each segment end) and rescales so
// total signal power matches the input.
Waveform apply_reverb(const Waveform& w, const ImpulseResponse& ir, PerturbScope scope,
                      const std::vector<SegmentRecord>& segments, double frame_ms = 30.0);

// Feature-domain channel mismatch surrogate for synthetic data: adds a fixed
// offset vector (seeded random direction, given magnitude) to every frame or
// to labeled-segment frames only, and tags the record reverb_full /
// reverb_segment.
UtteranceRecord apply_channel_bias(const UtteranceRecord& record, PerturbScope scope,
                                   double magnitude, uint64_t seed);

// Full feature-domain reverberation surrogate: the static-channel offset
// above plus a first-order IIR smear y_t = (1-a) x_t + a y_{t-1}. At full
// scope the smear runs over the whole stream (pre-segment content leaks into
// the segments); at segment scope it restarts from each labeled segment's
// first frame and nothing outside is touched (the tail analog of truncating
// the convolution at the segment end).
UtteranceRecord apply_feature_reverb(const UtteranceRecord& record, PerturbScope scope,
                                     double offset_magnitude, double smear_alpha,
                                     uint64_t seed);

// Partition by condition tag; multi-tagged utterances appear in each subset.
std::map<std::string, std::vector<UtteranceRecord>> split_eval_conditions(
    const std::vector<UtteranceRecord>& records);

}  // namespace segstream
