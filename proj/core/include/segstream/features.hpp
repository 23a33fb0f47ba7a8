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

#pragma once

#include <cstdint>

#include "segstream/matrix.hpp"
#include "segstream/wav.hpp"

namespace segstream {

struct LogMelConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int n_mels = 64;
  double fmin_hz = 20.0;
  double fmax_hz = 0.0;     // 0 = Nyquist
  double log_floor = 1e-10;  // added to mel energies before the log
};

enum class FeatureOrigin { extracted, synthetic };

struct FeatureMatrix {
  MatrixF frames;  // T_in x n_mels
  double frame_shift_ms = 10.0;
  FeatureOrigin origin = FeatureOrigin::extracted;
};

struct StackedFeatures {
  MatrixF frames;  // T x (3 * n_mels)
  int downsample_factor = 3;
  double encoder_frame_ms = 30.0;
};

// Hann-windowed log-mel filterbank energies. Frame count is
// floor((n_samples - window) / hop) + 1; throws if the waveform is shorter
// than one window or the sample rate is unsupported.
FeatureMatrix extract_logmel(const Waveform& w, const LogMelConfig& config = {});

// Output frame t concatenates input frames 3t, 3t+1, 3t+2; the final partial
// group repeats the last input frame, so T = ceil(T_in / 3).
StackedFeatures stack_downsample(const FeatureMatrix& f);

// Adaptive SpecAugment. Time-mask multiplicity scales with T so the masked
// fraction per second is the same however the audio is cut; see time_masks().
struct AugmentPolicy {
  int n_freq_masks = 2;
  int max_freq_width = 24;             // bins, within one 64-bin copy
  int time_mask_max_width = 25;        // frames
  double time_mask_rate = 0.004;       // masks per frame
  double max_total_time_masked_fraction = 0.2;
  uint64_t rng_seed = 0;

  int time_masks(int n_frames) const;
};

struct AugmentStats {
  int time_masked_frames = 0;
  int freq_masked_bins = 0;
};

// In-place masking of an arbitrary feature matrix. Frequency masks are drawn
// in [0, cols/stacked_copies) and applied identically to each stacked copy.
// The fill value is the matrix mean. Training-only; never call at evaluation.
AugmentStats spec_augment_matrix(MatrixF& m, const AugmentPolicy& policy, uint64_t seed,
                                 int stacked_copies);

StackedFeatures spec_augment(const StackedFeatures& f, const AugmentPolicy& policy);

}  // namespace segstream
