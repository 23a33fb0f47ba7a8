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
// The segmented vs full-utterance cost gap: full-utterance encoder/backward
// work covers the untranscribed prefix too, which is where the throughput
// difference comes from.

#include <benchmark/benchmark.h>

#include "segstream/dataset.hpp"
#include "segstream/objective.hpp"

namespace {

using namespace segstream;

struct Fixture {
  ContextCueSpec spec;
  std::vector<UtteranceRecord> records;
  ModelParams<float> params;

  Fixture() {
    spec.rng_seed = 77;
    records = generate_context_task(spec, 8);
    ModelConfig config;
    config.input_dim = spec.feature_dim();
    config.encoder_layers = 2;
    config.encoder_units = 64;
    config.prediction_layers = 1;
    config.prediction_units = 64;
    config.joint_units = 64;
    config.vocab_size = spec.vocab_size();
    params = init_params<float>(config, 5);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void run_utterance_loss(benchmark::State& state, TrainMode mode) {
  auto& f = fixture();
  size_t i = 0;
  for (auto _ : state) {
    const auto& r = f.records[i++ % f.records.size()];
    auto res = utterance_loss<float>(f.params, r.features, r.segments, mode);
    benchmark::DoNotOptimize(res.loss);
  }
}

void BM_UtteranceLossSegmented(benchmark::State& state) {
  run_utterance_loss(state, TrainMode::segmented);
}
BENCHMARK(BM_UtteranceLossSegmented);

void BM_UtteranceLossFullUtterance(benchmark::State& state) {
  run_utterance_loss(state, TrainMode::full_utterance);
}
BENCHMARK(BM_UtteranceLossFullUtterance);

void BM_EncoderForward(benchmark::State& state) {
  auto& f = fixture();
  const auto& feats = f.records.front().features;
  for (auto _ : state) {
    auto enc = encode(f.params, feats);
    benchmark::DoNotOptimize(enc.outputs().sum());
  }
  state.SetItemsProcessed(state.iterations() * feats.rows());
}
BENCHMARK(BM_EncoderForward);

}  // namespace
