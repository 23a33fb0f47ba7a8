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
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "segstream/features.hpp"
#include "segstream/objective.hpp"

namespace segstream {

// Linear ramp 0 -> peak over warmup_steps, flat for hold_steps, then
// exponential decay per step. Steps count from 1.
struct LrSchedule {
  double peak_lr = 2e-3;
  int64_t warmup_steps = 200;
  int64_t hold_steps = 800;
  double decay_rate = 0.9995;

  double lr(int64_t step) const {
    if (step <= warmup_steps) {
      return warmup_steps > 0 ? peak_lr * static_cast<double>(step) / warmup_steps : peak_lr;
    }
    if (step <= warmup_steps + hold_steps) return peak_lr;
    return peak_lr * std::pow(decay_rate, static_cast<double>(step - warmup_steps - hold_steps));
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainState {
  ModelParams<float> params;
  ModelParams<float> m;  // first moments
  ModelParams<float> v;  // second moments
  int64_t step = 0;
  uint64_t seed = 0;
};

TrainState make_train_state(const ModelConfig& config, uint64_t seed);

// One bias-corrected Adam update at lr(step+1); increments the step counter.
// Throws (naming the tensor) on non-finite gradients. max_grad_norm <= 0
// disables clipping.
void adam_step(TrainState& state, const ModelParams<float>& grads, const LrSchedule& schedule,
               const AdamConfig& adam = {}, double max_grad_norm = 0.0);

struct TrainOptions {
  TrainMode mode = TrainMode::full_utterance;
  int batch_size = 16;
  int64_t total_steps = 3000;
  int threads = 0;  // 0 = hardware concurrency
  int64_t checkpoint_every = 500;
  int keep_checkpoints = 6;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path log_path;      // empty = no log file
  std::ostream* log_stream = nullptr;  // optional mirror of the log lines
  std::optional<AugmentPolicy> augment;
  double max_grad_norm = 0.0;
  AdamConfig adam;
};

struct CheckpointEntry {
  std::filesystem::path path;
  int64_t step = 0;
  double dev_loss = 0.0;
};

struct TrainResult {
  std::filesystem::path best_checkpoint;
  double best_dev_loss = 0.0;
  int64_t steps_run = 0;
  double mean_batch_wall_ms = 0.0;
  double mean_forward_ms = 0.0;
  double mean_backward_ms = 0.0;
  std::vector<CheckpointEntry> checkpoints;
};

// Batched training. Batch loss is the mean over utterances of the summed
// per-segment losses; per-utterance gradients are reduced in utterance-index
// order, so runs are bit-reproducible for a fixed seed and any thread count.
TrainResult train(const std::vector<UtteranceRecord>& train_records,
                  const std::vector<UtteranceRecord>& dev_records, TrainState& state,
                  const LrSchedule& schedule, const TrainOptions& options);

// Mean utterance loss over a record set, forward only.
double dataset_loss(const ModelParams<float>& params,
                    const std::vector<UtteranceRecord>& records, TrainMode mode, int threads);

}  // namespace segstream
