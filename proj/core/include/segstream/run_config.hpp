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
// Flat sectioned text configuration for the CLI. Every field has a default
// that runs the reference experiment; unknown sections or keys are hard
// errors (a silent hyperparameter typo invalidates an experiment).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "segstream/dataset.hpp"
#include "segstream/features.hpp"
#include "segstream/model.hpp"
#include "segstream/training.hpp"

namespace segstream {

struct RunConfig {
  // [model]; input_dim/vocab_size of 0 mean "derive from the task spec".
  ModelConfig model{.input_dim = 0,
                    .encoder_layers = 2,
                    .encoder_units = 64,
                    .prediction_layers = 1,
                    .prediction_units = 64,
                    .joint_units = 64,
                    .vocab_size = 0};

  // [train]
  TrainMode mode = TrainMode::full_utterance;
  int batch_size = 16;
  int64_t total_steps = 3000;
  uint64_t seed = 0;
  int threads = 0;  // 0 = machine parallelism
  int64_t checkpoint_every = 500;
  int keep_checkpoints = 6;
  double max_grad_norm = 0.0;
  bool augment_enabled = false;
  LrSchedule schedule;

  // [augment]
  AugmentPolicy augment;

  // [task]
  ContextCueSpec task;
  int n_utterances = 256;

  // [eval]
  int beam_width = 4;

  // Resolves derived fields (input_dim, vocab_size) against the task spec.
  ModelConfig resolved_model() const {
    ModelConfig m = model;
    if (m.input_dim == 0) m.input_dim = task.feature_dim();
    if (m.vocab_size == 0) m.vocab_size = task.vocab_size();
    m.validate();
    return m;
  }
};

RunConfig load_run_config(const std::filesystem::path& path);

// Default config path: SEGSTREAM_CONFIG environment variable, if set.
RunConfig load_run_config_or_default(const std::string& cli_path);

std::string dump_run_config(const RunConfig& config);

}  // namespace segstream
